"""Multi-scale residual vector quantisation over a ladder of resolutions.

Encoding walks the ladder coarse to fine. At each scale the remaining
residual ``f - f_hat`` is area-averaged down to the scale's size, quantised
to the nearest codeword per location, looked up again, upsampled back to
full resolution and added to the running reconstruction ``f_hat``.
Decoding replays the accumulation from the token maps alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid, check_tokens, parse_size
from .dse import INTERP_KINDS, interpolate
from .exceptions import DomainError, ShapeError
from .spectral import apply_separable

DEFAULT_UPSAMPLE = "nearest"


@dataclass(frozen=True, eq=False)
class Codebook:
    """``V`` codewords of dimension ``C``; row 0 is always the zero vector."""

    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError(f"codebook must be a (V, C) matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("codebook contains non-finite values")
        if np.any(v[0] != 0.0):
            raise DomainError("codeword 0 must be the zero vector")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __repr__(self):
        return f"Codebook(size={self.size}, dim={self.dim})"

    @classmethod
    def generate(cls, size: int, dim: int, seed: int = 0, scale: float = 1.0) -> "Codebook":
        """Seeded Gaussian codebook with the zero word forced at index 0."""
        if size < 1 or dim < 1:
            raise ShapeError(f"codebook size and dim must be positive, got {size}, {dim}")
        vectors = scale * np.random.default_rng(seed).normal(size=(size, dim))
        vectors[0] = 0.0
        return cls(vectors)

    @classmethod
    def from_array(cls, arr, force_zero: bool = False) -> "Codebook":
        """Build from a ``(V, C)`` array or a ``(V, 1, C)`` / ``(1, V, C)`` tensor."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 3:
            if a.shape[1] == 1:
                a = a[:, 0, :]
            elif a.shape[0] == 1:
                a = a[0]
            else:
                raise ShapeError(f"codebook tensor must be (V,1,C) or (1,V,C), got {a.shape}")
        if force_zero:
            a = a.copy()
            a[0] = 0.0
        return cls(a)

    def as_tensor(self) -> np.ndarray:
        return self.vectors[:, None, :].copy()


def parse_ladder(text: str) -> tuple[tuple[int, int], ...]:
    """Parse ``"1x1,2x2,4x4"`` into ``((1, 1), (2, 2), (4, 4))``."""
    ladder = []
    for part in text.split(","):
        size = parse_size(part.strip())
        if len(size) != 2:
            raise ShapeError(f"ladder entries are HxW, got {part!r}")
        ladder.append(size)
    return tuple(ladder)


def format_ladder(ladder) -> str:
    return ",".join(f"{h}x{w}" for h, w in ladder)


def check_ladder(ladder, full_hw=None) -> tuple[tuple[int, int], ...]:
    ladder = tuple((int(h), int(w)) for h, w in ladder)
    if not ladder:
        raise ShapeError("ladder is empty")
    for (h0, w0), (h1, w1) in zip(ladder, ladder[1:]):
        if h1 < h0 or w1 < w0:
            raise ShapeError(f"ladder must be non-decreasing per axis: {format_ladder(ladder)}")
    if min(min(s) for s in ladder) < 1:
        raise ShapeError("ladder sizes must be positive")
    if full_hw is not None and ladder[-1] != tuple(full_hw):
        raise ShapeError(
            f"ladder ends at {ladder[-1][0]}x{ladder[-1][1]} but the field is "
            f"{full_hw[0]}x{full_hw[1]}"
        )
    return ladder


@lru_cache(maxsize=256)
def area_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """``(n_dst, n_src)`` matrix averaging input cells by fractional overlap."""
    if n_dst > n_src:
        raise ShapeError(f"area downsampling cannot grow {n_src} -> {n_dst}")
    ratio = n_src / n_dst
    lo = np.arange(n_dst)[:, None] * ratio
    cells = np.arange(n_src)[None, :]
    overlap = np.clip(np.minimum(lo + ratio, cells + 1) - np.maximum(lo, cells), 0.0, None)
    m = overlap / ratio
    m.setflags(write=False)
    return m


def downsample_area(x, target_h: int, target_w: int) -> np.ndarray:
    x = check_grid(x, name="field")
    h, w = x.shape[:2]
    if (h, w) == (target_h, target_w):
        return x.copy()
    return apply_separable(area_matrix(h, target_h), x, area_matrix(w, target_w))


def quantize_nearest(residual, codebook: Codebook) -> np.ndarray:
    """Index of the nearest codeword per location; ties go to the lowest index."""
    r = check_grid(residual, ndim=3, name="residual")
    if r.shape[2] != codebook.dim:
        raise ShapeError(f"residual has {r.shape[2]} channels, codebook dim is {codebook.dim}")
    diff = r[:, :, None, :] - codebook.vectors[None, None, :, :]
    dist = np.einsum("hwvc,hwvc->hwv", diff, diff)
    return np.argmin(dist, axis=2).astype(np.int64)


def dequantize(tokens, codebook: Codebook) -> np.ndarray:
    idx = check_tokens(tokens, codebook.size)
    return codebook.vectors[idx]


def upsample_u(z, target_h: int, target_w: int, kind: str = DEFAULT_UPSAMPLE) -> np.ndarray:
    """The accumulation upsampler; same contract as :func:`nextscale.dse.interpolate`."""
    return interpolate(z, target_h, target_w, kind)


def _check_kind(kind):
    if kind not in INTERP_KINDS:
        raise ShapeError(f"unknown upsampling kind {kind!r}")


def encode_multiscale(f, ladder, codebook: Codebook, kind: str = DEFAULT_UPSAMPLE, *, return_steps=False):
    """Quantise a feature field into one token map per ladder scale.

    With ``return_steps`` also returns the list of partial reconstructions
    ``f_hat_1..f_hat_K``.
    """
    f = check_grid(f, ndim=3, name="feature")
    _check_kind(kind)
    H, W, C = f.shape
    ladder = check_ladder(ladder, (H, W))
    if C != codebook.dim:
        raise ShapeError(f"feature has {C} channels, codebook dim is {codebook.dim}")
    f_hat = np.zeros_like(f)
    tokens, steps = [], []
    for h, w in ladder:
        residual = downsample_area(f - f_hat, h, w)
        tok = quantize_nearest(residual, codebook)
        f_hat = f_hat + upsample_u(dequantize(tok, codebook), H, W, kind)
        tokens.append(tok)
        steps.append(f_hat)
    return (tokens, steps) if return_steps else tokens


def reconstruct(tokens, ladder, codebook: Codebook, kind: str = DEFAULT_UPSAMPLE, *, return_steps=False):
    """Sum of upsampled, de-quantised token maps at the ladder's final size."""
    _check_kind(kind)
    ladder = check_ladder(ladder)
    if len(tokens) != len(ladder):
        raise ShapeError(f"{len(tokens)} token maps for a {len(ladder)}-scale ladder")
    H, W = ladder[-1]
    f_hat = np.zeros((H, W, codebook.dim))
    steps = []
    for tok, (h, w) in zip(tokens, ladder):
        tok = check_tokens(tok, codebook.size)
        if tok.shape != (h, w):
            raise ShapeError(f"token map {tok.shape} does not match ladder entry {h}x{w}")
        f_hat = f_hat + upsample_u(dequantize(tok, codebook), H, W, kind)
        steps.append(f_hat)
    return (f_hat, steps) if return_steps else f_hat


def mse(a, b) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


class MultiScaleResidualQuantizer(TransformerMixin, BaseEstimator):
    """Estimator interface: ``transform`` encodes, ``inverse_transform`` decodes.

    ``fit`` does not learn anything; it fixes the codebook (procedural,
    seeded, or user supplied) and checks the ladder against the field size.

    Parameters
    ----------
    ladder : sequence of (h, w) or str like ``"1x1,2x2,4x4"``
    codebook_size : int
        ``V`` for the generated codebook; ignored when ``codebook`` is given.
    codebook : Codebook or array, optional
    random_state : int
        Seed of the generated codebook.
    upsample : {"nearest", "linear"}
    """

    def __init__(self, ladder="1x1,2x2,4x4,8x8", codebook_size=32, codebook=None, random_state=0, upsample=DEFAULT_UPSAMPLE):
        self.ladder = ladder
        self.codebook_size = codebook_size
        self.codebook = codebook
        self.random_state = random_state
        self.upsample = upsample

    def _ladder(self):
        return parse_ladder(self.ladder) if isinstance(self.ladder, str) else check_ladder(self.ladder)

    def fit(self, X, y=None):
        x = check_grid(X, ndim=3, name="X")
        self.ladder_ = check_ladder(self._ladder(), x.shape[:2])
        _check_kind(self.upsample)
        if self.codebook is None:
            self.codebook_ = Codebook.generate(self.codebook_size, x.shape[2], seed=self.random_state)
        elif isinstance(self.codebook, Codebook):
            self.codebook_ = self.codebook
        else:
            self.codebook_ = Codebook.from_array(self.codebook)
        if self.codebook_.dim != x.shape[2]:
            raise ShapeError(f"codebook dim {self.codebook_.dim} != feature channels {x.shape[2]}")
        self.n_features_in_ = x.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        return encode_multiscale(X, self.ladder_, self.codebook_, self.upsample)

    def inverse_transform(self, tokens):
        check_is_fitted(self, "codebook_")
        return reconstruct(tokens, self.ladder_, self.codebook_, self.upsample)
