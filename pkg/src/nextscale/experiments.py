"""Assemble runs from a :class:`Config` and the prior/decay ablation grid."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ._validation import parse_size
from .codec import Codebook, parse_ladder
from .config import Config, ConfigError
from .dse import build_prior
from .exceptions import NextScaleError, ShapeError
from .grids import load_tensor
from .guidance import GuidanceSchedule
from .pipeline import OracleConfig, RunConfig, compare, run_completion, run_generation
from .spectral import dct2
from .synth import synthesize

ABLATION_HEADER = ["cell", "prior", "decay", "beta0", "median_final_mse", "median_final_accuracy", "wall_s"]
ABLATION_PRIORS = ("nearest", "linear", "dse_zero", "dse")
ABLATION_DECAYS = ("linear", "constant")


class AblationCheckError(NextScaleError):
    """An internal consistency check of the ablation grid failed."""


def load_reference(source: str) -> np.ndarray:
    """Load a feature tensor, or synthesise one from ``demo:KIND,HxWxC,SEED``."""
    if source.startswith("demo:"):
        try:
            kind, size, seed = source[5:].split(",")
            h, w, c = parse_size(size)
        except ValueError:
            raise ConfigError(f"expected demo:KIND,HxWxC,SEED, got {source!r}") from None
        return synthesize(kind, h, w, c, int(seed))
    return load_tensor(source)


def load_codebook(source: str, channels: int) -> Codebook:
    """Load a codebook tensor, or generate one from ``gen:V,C|auto,SEED[,SCALE]``."""
    if source.startswith("gen:"):
        parts = source[4:].split(",")
        if len(parts) not in (3, 4):
            raise ConfigError(f"expected gen:V,C,SEED[,SCALE], got {source!r}")
        try:
            size = int(parts[0])
            dim = channels if parts[1] == "auto" else int(parts[1])
            seed = int(parts[2])
            scale = float(parts[3]) if len(parts) == 4 else 0.5
        except ValueError:
            raise ConfigError(f"bad codebook generator {source!r}") from None
        if dim != channels:
            raise ShapeError(f"codebook dim {dim} != feature channels {channels}")
        return Codebook.generate(size, dim, seed, scale)
    cb = Codebook.from_array(load_tensor(source))
    if cb.dim != channels:
        raise ShapeError(f"codebook dim {cb.dim} != feature channels {channels}")
    return cb


def build_configs(cfg: Config, channels: int):
    """Return ``(RunConfig, OracleConfig)`` described by ``cfg``."""
    ladder = parse_ladder(cfg["ladder"])
    codebook = load_codebook(cfg["codebook"], channels)
    rc = RunConfig(
        ladder=ladder,
        codebook=codebook,
        schedule=GuidanceSchedule(cfg.get_float("beta0"), len(ladder), cfg.get_enum("decay")),
        prior_mode=cfg.get_enum("prior"),
        temperature=cfg.get_float("temperature"),
        argmax=cfg["argmax"],
        with_ssg=cfg.get_enum("variants") != "baseline",
        prefix_scales=0,
        seeds=cfg.get_ints("seeds"),
        upsample=cfg.get_enum("upsample"),
        amplitude_preserving=not cfg["raw_copy"],
        interp=cfg.get_enum("interp"),
        cache_guided=cfg["cache_guided"],
    )
    oc = OracleConfig(
        logit_scale=cfg.get_float("logit_scale"),
        noise_sigma=cfg.get_float("sigma"),
        lowpass_lambda=cfg.get_float("lambda"),
        seed=cfg.get_int("oracle_seed"),
    )
    return rc, oc


def execute(cfg: Config, completion: bool = False):
    """Run the configured experiment; returns the merged :class:`RunReport`."""
    reference = load_reference(cfg["feature"])
    rc, oc = build_configs(cfg, reference.shape[2])
    if completion:
        rc = replace(rc, prefix_scales=cfg.get_int("prefix"))
    variants = cfg.get_enum("variants")
    if variants == "both":
        return compare(reference, rc, oc, completion=completion)
    runner = run_completion if completion else run_generation
    return runner(reference, replace(rc, with_ssg=variants == "ssg"), oc)


def _low_band_check(reference, rc, oc, tol=1e-9):
    """Priors of dse and dse_zero share their low DCT band at every step."""
    steps = []
    run_generation(reference, replace(rc, seeds=rc.seeds[:1]), oc,
                   hook=lambda s: steps.append(s) if s["prior_source"] is not None else None)
    for s in steps:
        h, w = s["raw"].shape[:2]
        src = s["prior_source"]
        kw = dict(amplitude_preserving=rc.amplitude_preserving, interp=rc.interp)
        a = dct2(build_prior(src, h, w, "dse", **kw))
        b = dct2(build_prior(src, h, w, "dse_zero", **kw))
        hs, ws = src.shape[:2]
        err = float(np.max(np.abs(a[:hs, :ws] - b[:hs, :ws])))
        if err > tol:
            raise AblationCheckError(f"dse/dse_zero low bands differ by {err:.3g} at step {s['k']}")


def ablation_suite(reference, rc: RunConfig, oc: OracleConfig):
    """Baseline plus every prior mode under linear and constant decay.

    All cells share ``rc.seeds``. Returns CSV rows matching
    :data:`ABLATION_HEADER`. Raises :class:`AblationCheckError` if the
    baseline differs from a zero-strength guided run or the two spectral
    priors disagree on their shared low band.
    """
    rows = []

    t0 = time.perf_counter()
    base = run_generation(reference, replace(rc, with_ssg=False), oc, variant="baseline")
    wall = time.perf_counter() - t0
    rows.append(["baseline", "none", "none", 0.0, base.median_final_mse(),
                 base.median_final_accuracy(), wall])

    zero = replace(rc, with_ssg=True, schedule=replace(rc.schedule, beta0=0.0))
    zero_report = run_generation(reference, zero, oc, variant="baseline")
    if [r.row() for r in zero_report.records] != [r.row() for r in base.records]:
        raise AblationCheckError("baseline is not bit-identical to the beta=0 guided run")

    _low_band_check(reference, rc, oc)

    for prior in ABLATION_PRIORS:
        for decay in ABLATION_DECAYS:
            cell = replace(rc, with_ssg=True, prior_mode=prior,
                           schedule=replace(rc.schedule, mode=decay))
            t0 = time.perf_counter()
            rep = run_generation(reference, cell, oc)
            wall = time.perf_counter() - t0
            rows.append([f"{prior}/{decay}", prior, decay, rc.schedule.beta0,
                         rep.median_final_mse(), rep.median_final_accuracy(), wall])
    return rows
