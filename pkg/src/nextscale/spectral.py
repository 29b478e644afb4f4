"""Orthonormal 2-D DCT-II / DCT-III and frequency-band helpers.

Transforms act on axes 0 and 1 of a ``(h, w)`` grid or, channel by
channel, of an ``(h, w, c)`` grid. Coefficient ``(0, 0)`` is DC and indices
grow with spatial frequency.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ._validation import check_grid
from .exceptions import ShapeError


@lru_cache(maxsize=128)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``C`` with ``C @ x`` the transform of ``x``.

    ``C[k, t] = s_k * cos(pi * (t + 1/2) * k / n)`` with ``s_0 = sqrt(1/n)``
    and ``s_k = sqrt(2/n)`` otherwise, so ``C.T`` is the exact inverse.
    """
    k = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    c = np.cos(np.pi * (t + 0.5) * k / n) * np.sqrt(2.0 / n)
    c[0, :] = np.sqrt(1.0 / n)
    c.setflags(write=False)
    return c


def apply_separable(rows: np.ndarray, x: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Compute ``rows @ x @ cols.T`` over axes 0 and 1, broadcasting channels."""
    if x.ndim == 2:
        return rows @ x @ cols.T
    h, _, c = x.shape
    # width first as a batched product, then height as one flat GEMM
    t = np.matmul(cols, x)
    return (rows @ t.reshape(h, -1)).reshape(rows.shape[0], cols.shape[0], c)


def dct2(grid) -> np.ndarray:
    """Orthonormal 2-D DCT-II of a grid (per channel for 3-D input)."""
    x = check_grid(grid, name="grid")
    h, w = x.shape[:2]
    return apply_separable(dct_matrix(h), x, dct_matrix(w))


def idct2(spec) -> np.ndarray:
    """Inverse of :func:`dct2` (orthonormal DCT-III)."""
    s = check_grid(spec, name="spectrum")
    h, w = s.shape[:2]
    return apply_separable(dct_matrix(h).T, s, dct_matrix(w).T)


def amplitude_factor(source_hw, target_hw) -> float:
    """Gain that keeps a constant grid constant when its low band is embedded."""
    return float(np.sqrt((target_hw[0] * target_hw[1]) / (source_hw[0] * source_hw[1])))


def embed_low_band(target, source, amplitude_preserving: bool = True) -> np.ndarray:
    """Overwrite the low-frequency corner of ``target`` with ``source``.

    Indices ``i < H_s, j < W_s`` of the result hold ``alpha * source``; all
    other coefficients are copied from ``target``. With
    ``amplitude_preserving`` the gain is ``sqrt(H_t W_t / (H_s W_s))``,
    which compensates the orthonormal DC scaling; otherwise the coefficients
    are copied verbatim.
    """
    tgt = check_grid(target, name="target")
    src = check_grid(source, name="source")
    if tgt.ndim != src.ndim or tgt.shape[2:] != src.shape[2:]:
        raise ShapeError(f"channel layout differs: {src.shape} vs {tgt.shape}")
    hs, ws = src.shape[:2]
    ht, wt = tgt.shape[:2]
    if hs > ht or ws > wt:
        raise ShapeError(f"source {hs}x{ws} does not fit in target {ht}x{wt}")
    alpha = amplitude_factor((hs, ws), (ht, wt)) if amplitude_preserving else 1.0
    out = tgt.copy()
    out[:hs, :ws] = alpha * src
    return out


def band_energy(spec, h_cut: int, w_cut: int) -> tuple[float, float]:
    """Split spectral energy into the ``[:h_cut, :w_cut]`` corner and the rest."""
    s = check_grid(spec, name="spectrum")
    h, w = s.shape[:2]
    if not (0 <= h_cut <= h and 0 <= w_cut <= w):
        raise ShapeError(f"cut {h_cut}x{w_cut} outside spectrum {h}x{w}")
    sq = s * s
    total = float(sq.sum())
    low = float(sq[:h_cut, :w_cut].sum())
    return low, total - low
