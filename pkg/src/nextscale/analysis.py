"""Spectral diagnostics and the guidance latency benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import check_grid, check_same_shape
from .dse import build_prior
from .exceptions import DomainError, ShapeError
from .guidance import apply_ssg

LOG_FLOOR = 1e-12
BENCH_HEADER = ["size", "op", "mean_s", "std_s", "ratio"]


@dataclass(frozen=True)
class SpectralProfile:
    """Radially binned spectrum.

    ``values`` holds the log of the mean (orthonormal) Fourier amplitude per
    annulus, or a difference of such logs. ``energy`` is the summed squared
    amplitude per annulus when the profile comes from a single grid.
    """

    bins: np.ndarray
    values: np.ndarray
    energy: Optional[np.ndarray] = None
    nyquist_bin: Optional[float] = None

    def rows(self):
        return [(float(b), float(v)) for b, v in zip(self.bins, self.values)]

    def above(self, radius):
        return self.values[self.bins >= radius]

    def below(self, radius):
        return self.values[self.bins < radius]


def _radius_bins(h, w) -> np.ndarray:
    fy = np.fft.fftfreq(h) * h
    fx = np.fft.fftfreq(w) * w
    return np.floor(np.hypot(fy[:, None], fx[None, :])).astype(np.int64)


def _profile_2d(x: np.ndarray):
    h, w = x.shape
    amp = np.abs(np.fft.fft2(x, norm="ortho"))
    radius = _radius_bins(h, w).ravel()
    counts = np.bincount(radius)
    present = np.flatnonzero(counts)
    amp_sum = np.bincount(radius, weights=amp.ravel())[present]
    energy = np.bincount(radius, weights=(amp * amp).ravel())[present]
    log_amp = np.log(amp_sum / counts[present] + LOG_FLOOR)
    return present.astype(np.float64), log_amp, energy


def radial_spectrum(grid) -> SpectralProfile:
    """Log mean Fourier amplitude over unit-width annuli around zero frequency.

    Radii are measured in cycles per grid, so an integer bin ``r`` gathers
    frequencies with ``r <= |k| < r + 1``. Annulus energies partition the
    total energy of the grid.
    """
    x = check_grid(grid, ndim=2, name="grid")
    bins, values, energy = _profile_2d(x)
    return SpectralProfile(bins, values, energy)


def delta_log_magnitude(a, b, nyquist: Optional[float] = None) -> SpectralProfile:
    """Channel-averaged difference of radial log-amplitude profiles, ``a`` minus ``b``.

    Both grids are ``(h, w)`` or ``(h, w, c)`` of the same shape. Where ``b``
    has no energy its profile sits at ``log(1e-12)``, so the difference
    saturates instead of diverging.
    """
    a = check_grid(a, name="a")
    b = check_grid(b, name="b")
    check_same_shape(a, b, ("a", "b"))
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    diffs = []
    bins = None
    for ch in range(a.shape[2]):
        bins, pa, _ = _profile_2d(a[:, :, ch])
        _, pb, _ = _profile_2d(b[:, :, ch])
        diffs.append(pa - pb)
    return SpectralProfile(bins, np.mean(diffs, axis=0), None, nyquist)


def nyquist_bin(prev_h: int, prev_w: int, cur_h: int, cur_w: int) -> float:
    """Highest radius the previous scale can represent, in current-grid bins."""
    if min(prev_h, prev_w, cur_h, cur_w) < 1:
        raise ShapeError("sizes must be positive")
    if prev_h > cur_h or prev_w > cur_w:
        raise ShapeError(f"previous scale {prev_h}x{prev_w} exceeds current {cur_h}x{cur_w}")
    return min(prev_h, prev_w) / 2.0


# -- latency --------------------------------------------------------------------


def _time(fn, reps, warmup):
    for _ in range(warmup):
        fn()
    samples = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    return float(samples.mean()), float(samples.std())


def latency_bench(sizes, reps=100, seed=0, beta=1.0, warmup=3, threads=1):
    """Time guidance against a dense ``V x V`` dummy predictor step.

    Each size ``(h, w, V)`` is the previous scale; the current scale is
    ``(2h, 2w)``. The predictor step multiplies the ``(2h * 2w, V)`` logit
    matrix by a dense ``V x V`` matrix. The guidance step is
    ``build_prior(..., "dse")`` followed by ``apply_ssg``. Returns rows
    ``(size, op, mean_s, std_s, ratio)`` where ratio is relative to the
    predictor mean.
    """
    if reps < 10:
        raise DomainError(f"reps must be >= 10, got {reps}")
    rng = np.random.default_rng(seed)
    rows = []
    with threadpool_limits(limits=threads):
        for h, w, v in sizes:
            H, W = 2 * h, 2 * w
            prev = rng.standard_normal((h, w, v))
            cur = rng.standard_normal((H, W, v))
            weights = rng.standard_normal((v, v)) / np.sqrt(v)
            flat = cur.reshape(H * W, v)
            pred_mean, pred_std = _time(lambda: flat @ weights, reps, warmup)

            def guide():
                return apply_ssg(cur, build_prior(prev, H, W, "dse"), beta)

            ssg_mean, ssg_std = _time(guide, reps, warmup)
            label = f"{h}x{w}x{v}"
            rows.append((label, "predictor", pred_mean, pred_std, 1.0))
            rows.append((label, "dse_ssg", ssg_mean, ssg_std, ssg_mean / pred_mean))
    return rows
