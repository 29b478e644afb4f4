"""Next-scale generation with a corrupted teacher standing in for the model.

The teacher tokens come from encoding a reference feature field. At each
scale the oracle emits logits that favour the teacher token, blended toward
the upsampled previous-scale answer (``lowpass_lambda``, the redundancy
failure mode guidance is meant to counter) and perturbed with Gaussian
noise. Sampling, guidance and reconstruction then follow the usual
coarse-to-fine loop, and every scale is scored against the teacher.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._validation import check_grid, check_tokens
from .codec import DEFAULT_UPSAMPLE, Codebook, check_ladder, dequantize, encode_multiscale, mse, upsample_u
from .dse import PriorMode, build_prior, interpolate
from .exceptions import DomainError, ShapeError
from .grids import write_csv
from .guidance import GuidanceSchedule, apply_ssg, beta_at

REPORT_HEADER = ["variant", "seed", "scale", "height", "width", "generated", "accuracy", "mse", "psnr"]


@dataclass(frozen=True)
class OracleConfig:
    logit_scale: float = 4.0
    noise_sigma: float = 1.0
    lowpass_lambda: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.logit_scale > 0:
            raise DomainError(f"logit_scale must be > 0, got {self.logit_scale}")
        if not self.noise_sigma >= 0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.lowpass_lambda <= 1.0:
            raise DomainError(f"lowpass_lambda must lie in [0, 1], got {self.lowpass_lambda}")


@dataclass(frozen=True)
class RunConfig:
    ladder: tuple
    codebook: Codebook
    schedule: GuidanceSchedule
    prior_mode: str = "dse"
    temperature: float = 1.0
    argmax: bool = False
    with_ssg: bool = True
    prefix_scales: int = 0
    seeds: tuple = (0,)
    upsample: str = DEFAULT_UPSAMPLE
    amplitude_preserving: bool = True
    interp: str = "linear"
    cache_guided: bool = False

    def __post_init__(self):
        ladder = check_ladder(self.ladder)
        object.__setattr__(self, "ladder", ladder)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        PriorMode.parse(self.prior_mode)
        if self.schedule.steps != len(ladder):
            raise ShapeError(f"schedule has {self.schedule.steps} steps, ladder has {len(ladder)}")
        if not self.argmax and not self.temperature > 0:
            raise DomainError(f"temperature must be > 0 unless argmax, got {self.temperature}")
        if not 0 <= self.prefix_scales <= len(ladder):
            raise ShapeError(f"prefix_scales {self.prefix_scales} outside 0..{len(ladder)}")
        if not self.seeds:
            raise DomainError("at least one seed is required")

    @property
    def steps(self) -> int:
        return len(self.ladder)


@dataclass(frozen=True)
class ScaleRecord:
    variant: str
    seed: int
    scale: int
    height: int
    width: int
    generated: bool
    accuracy: float
    mse: float
    psnr: float

    def row(self):
        return [self.variant, self.seed, self.scale, self.height, self.width,
                self.generated, self.accuracy, self.mse, self.psnr]


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)

    def extend(self, other: "RunReport") -> "RunReport":
        self.records.extend(other.records)
        self.wall_times.update(other.wall_times)
        return self

    def sorted_records(self):
        return sorted(self.records, key=lambda r: (r.variant, r.seed, r.scale))

    def variants(self):
        return sorted({r.variant for r in self.records})

    def final(self, variant=None):
        """Records of the last scale, one per seed."""
        recs = [r for r in self.records if variant is None or r.variant == variant]
        if not recs:
            return []
        last = max(r.scale for r in recs)
        return [r for r in recs if r.scale == last]

    def median_final_mse(self, variant=None) -> float:
        return statistics.median(r.mse for r in self.final(variant))

    def median_final_accuracy(self, variant=None) -> float:
        return statistics.median(r.accuracy for r in self.final(variant))

    def per_scale_median(self, metric="mse", variant=None) -> dict:
        by_scale = {}
        for r in self.records:
            if variant is None or r.variant == variant:
                by_scale.setdefault(r.scale, []).append(getattr(r, metric))
        return {k: statistics.median(v) for k, v in sorted(by_scale.items())}

    def to_csv(self, path) -> None:
        write_csv(path, REPORT_HEADER, (r.row() for r in self.sorted_records()))

    def summary(self) -> str:
        lines = []
        for v in self.variants():
            curve = " ".join(f"{m:.6g}" for m in self.per_scale_median("mse", v).values())
            wall = sum(t for (var, _), t in self.wall_times.items() if var == v)
            lines.append(
                f"{v}: median final mse={self.median_final_mse(v):.6g} "
                f"accuracy={self.median_final_accuracy(v):.4f} "
                f"per-scale mse=[{curve}] wall={wall:.3f}s"
            )
        return "\n".join(lines)


# -- oracle and sampler -------------------------------------------------------


def ideal_logits(tokens, vocab_size: int, logit_scale: float) -> np.ndarray:
    """``logit_scale`` on the teacher token, zero elsewhere."""
    tok = check_tokens(tokens, vocab_size)
    out = np.zeros(tok.shape + (vocab_size,))
    np.put_along_axis(out, tok[:, :, None], logit_scale, axis=2)
    return out


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) & (2**63 - 1) for k in key])))


def oracle_logits(teacher_tokens, prev_ideal_logits, cfg: OracleConfig, k: int, vocab_size: int, stream: int = 0):
    """Corrupted teacher logits for scale ``k``.

    ``(1 - lambda) * ideal + lambda * upsample(prev_ideal) + N(0, sigma^2)``,
    where the blend only applies when previous-scale ideal logits exist.
    The noise is a pure function of ``(cfg.seed, stream, k)``.
    """
    ideal = ideal_logits(teacher_tokens, vocab_size, cfg.logit_scale)
    h, w = ideal.shape[:2]
    out = ideal
    if prev_ideal_logits is not None:
        prev = check_grid(prev_ideal_logits, ndim=3, name="prev_ideal_logits")
        if prev.shape[2] != vocab_size:
            raise ShapeError(f"previous logits have {prev.shape[2]} channels, expected {vocab_size}")
        lam = cfg.lowpass_lambda
        out = (1.0 - lam) * ideal + lam * interpolate(prev, h, w, "linear")
    if cfg.noise_sigma > 0:
        out = out + cfg.noise_sigma * _rng(cfg.seed, stream, k).standard_normal(out.shape)
    return out


def sample_map(logits, temperature: float = 1.0, seed: int = 0, k: int = 0, argmax: bool = False):
    """Draw one token per location from ``softmax(logits / temperature)``.

    Uniforms come from a Philox stream keyed by ``(seed, k)``; location
    ``(i, j)`` always consumes counter position ``i * w + j``, so two runs
    with equal keys see identical randomness wherever their logits agree.
    """
    x = check_grid(logits, ndim=3, name="logits")
    if argmax:
        return np.argmax(x, axis=2).astype(np.int64)
    if not np.isfinite(temperature) or temperature <= 0:
        raise DomainError(f"temperature must be > 0 unless argmax, got {temperature}")
    z = x / temperature
    z = z - z.max(axis=2, keepdims=True)
    cdf = np.cumsum(np.exp(z), axis=2)
    h, w, v = x.shape
    u = _rng(seed, k).random(h * w).reshape(h, w, 1) * cdf[:, :, -1:]
    idx = np.sum(cdf <= u, axis=2)
    return np.minimum(idx, v - 1).astype(np.int64)


def psnr(reference, estimate) -> float:
    """PSNR in dB with the reference's value range as peak (1 if flat).

    Exact reconstructions are scored against a 1e-30 MSE floor to stay finite.
    """
    ref = np.asarray(reference, dtype=np.float64)
    peak = float(np.ptp(ref)) or 1.0
    return float(10.0 * np.log10(peak**2 / max(mse(reference, estimate), 1e-30)))


# -- generation loops ---------------------------------------------------------

StepHook = Callable[[dict], None]


def _run_seed(reference, teacher, rc: RunConfig, oc: OracleConfig, seed: int, variant: str, hook: Optional[StepHook]):
    cb = rc.codebook
    H, W = rc.ladder[-1]
    f_hat = np.zeros((H, W, cb.dim))
    cache = prev_ideal = None
    records = []
    for k, (h, w) in enumerate(rc.ladder, start=1):
        raw = oracle_logits(teacher[k - 1], prev_ideal, oc, k, cb.size, stream=seed)
        generated = k > rc.prefix_scales
        prior = None
        if rc.with_ssg and k > 1:
            prior = build_prior(
                cache, h, w, rc.prior_mode,
                amplitude_preserving=rc.amplitude_preserving, interp=rc.interp,
            )
            logits = apply_ssg(raw, prior, beta_at(rc.schedule, k))
        else:
            logits = raw
        if generated:
            tokens = sample_map(logits, rc.temperature, seed, k, rc.argmax)
        else:
            tokens = teacher[k - 1]
        if hook is not None:
            hook(dict(variant=variant, seed=seed, k=k, raw=raw, prior_source=cache,
                      prior=prior, guided=logits, tokens=tokens))
        cache = logits if rc.cache_guided else raw
        prev_ideal = ideal_logits(teacher[k - 1], cb.size, oc.logit_scale)
        f_hat = f_hat + upsample_u(dequantize(tokens, cb), H, W, rc.upsample)
        records.append(ScaleRecord(
            variant, seed, k, h, w, generated,
            float(np.mean(tokens == teacher[k - 1])),
            mse(reference, f_hat),
            psnr(reference, f_hat),
        ))
    return records


def _run(reference, rc: RunConfig, oc: OracleConfig, variant=None, hook=None) -> RunReport:
    ref = check_grid(reference, ndim=3, name="reference")
    check_ladder(rc.ladder, ref.shape[:2])
    teacher = encode_multiscale(ref, rc.ladder, rc.codebook, rc.upsample)
    variant = variant or ("ssg" if rc.with_ssg else "baseline")
    report = RunReport()
    for seed in rc.seeds:
        t0 = time.perf_counter()
        report.records.extend(_run_seed(ref, teacher, rc, oc, seed, variant, hook))
        report.wall_times[(variant, seed)] = time.perf_counter() - t0
    return report


def run_generation(reference, rc: RunConfig, oc: OracleConfig, *, variant=None, hook=None) -> RunReport:
    """Generate every scale; guidance applies from step 2 when ``rc.with_ssg``.

    ``hook`` receives a dict per step (raw logits, the array the prior was
    built from, the guided logits, sampled tokens) for instrumentation.
    """
    return _run(reference, replace(rc, prefix_scales=0), oc, variant, hook)


def run_completion(reference, rc: RunConfig, oc: OracleConfig, *, variant=None, hook=None) -> RunReport:
    """Teacher-force the first ``rc.prefix_scales`` scales and generate the rest."""
    if not 1 <= rc.prefix_scales < rc.steps:
        raise ShapeError(f"completion needs 1 <= prefix_scales < {rc.steps}, got {rc.prefix_scales}")
    return _run(reference, rc, oc, variant, hook)


def compare(reference, rc: RunConfig, oc: OracleConfig, completion=False) -> RunReport:
    """Baseline and guided runs under identical seeds, merged into one report."""
    runner = run_completion if completion else run_generation
    report = runner(reference, replace(rc, with_ssg=False), oc, variant="baseline")
    return report.extend(runner(reference, replace(rc, with_ssg=True), oc, variant="ssg"))
