"""Seeded synthetic feature fields so experiments need no external data."""

from __future__ import annotations

import numpy as np

from .exceptions import DomainError

KINDS = ("blobs", "checkerboard", "noise")


def gaussian_blobs(h, w, c, seed=0, n_blobs=3) -> np.ndarray:
    """Per-channel sum of isotropic Gaussian bumps with random sign and width."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing="ij")
    out = np.zeros((h, w, c))
    for ch in range(c):
        for _ in range(n_blobs):
            cy, cx = rng.uniform(0, 1, size=2)
            width = rng.uniform(0.08, 0.3)
            amp = rng.normal()
            out[:, :, ch] += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
    return out


def checkerboard(h, w, c, seed=0) -> np.ndarray:
    """Per-channel +/-amplitude checkerboard with a random power-of-two cell size."""
    rng = np.random.default_rng(seed)
    out = np.empty((h, w, c))
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for ch in range(c):
        cell = 2 ** int(rng.integers(0, 3))
        sign = np.where(((ii // cell) + (jj // cell)) % 2 == 0, 1.0, -1.0)
        out[:, :, ch] = rng.uniform(0.5, 1.5) * sign
    return out


def synthesize(kind: str, h: int, w: int, c: int, seed: int = 0) -> np.ndarray:
    if min(h, w, c) < 1:
        raise DomainError(f"size must be positive, got {h}x{w}x{c}")
    if kind == "blobs":
        return gaussian_blobs(h, w, c, seed)
    if kind == "checkerboard":
        return checkerboard(h, w, c, seed)
    if kind == "noise":
        return np.random.default_rng(seed).normal(size=(h, w, c))
    raise DomainError(f"unknown demo kind {kind!r}; expected one of {KINDS}")
