"""Prior construction for guided next-scale sampling.

``build_prior`` upsamples the previous step's logits to the current scale.
The spatial modes (``nearest``, ``linear``) only resample. The spectral
modes keep the exact low-frequency DCT band of the coarse logits and take
the remaining band either from a linear upsampling (``dse``) or leave it
empty (``dse_zero``).

Every mode is linear and separable per axis, so each one is precomputed
once per size pair as a short sum of ``P @ x @ Q.T`` terms. The literal
transform-embed-invert route is kept in :func:`build_prior_spectral` and
the two agree to round-off.
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid, check_size, check_upscale
from .exceptions import ShapeError
from .spectral import amplitude_factor, apply_separable, dct2, dct_matrix, embed_low_band, idct2


class PriorMode(str, enum.Enum):
    NEAREST = "nearest"
    LINEAR = "linear"
    DSE = "dse"
    DSE_ZERO = "dse_zero"

    @classmethod
    def parse(cls, value) -> "PriorMode":
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ShapeError(f"unknown prior mode {value!r}; expected one of {choices}") from None


INTERP_KINDS = ("nearest", "linear")


@lru_cache(maxsize=256)
def interpolation_matrix(n_src: int, n_dst: int, kind: str = "linear") -> np.ndarray:
    """1-D resampling matrix of shape ``(n_dst, n_src)``.

    ``nearest`` maps output ``i`` to ``floor(i * n_src / n_dst)``.
    ``linear`` samples at pixel centres (align-corners off) with edge clamping.
    """
    if kind not in INTERP_KINDS:
        raise ShapeError(f"unknown interpolation kind {kind!r}")
    m = np.zeros((n_dst, n_src))
    rows = np.arange(n_dst)
    if kind == "nearest":
        m[rows, (rows * n_src) // n_dst] = 1.0
    else:
        pos = np.clip((rows + 0.5) * n_src / n_dst - 0.5, 0.0, n_src - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_src - 1)
        frac = pos - lo
        np.add.at(m, (rows, lo), 1.0 - frac)
        np.add.at(m, (rows, hi), frac)
    m.setflags(write=False)
    return m


def interpolate(src, target_h: int, target_w: int, kind: str = "linear") -> np.ndarray:
    """Upsample a ``(h, w)`` or ``(h, w, c)`` grid to ``target_h x target_w``."""
    x = check_grid(src, name="src")
    target_h, target_w = check_size(target_h, target_w, "target")
    h, w = x.shape[:2]
    check_upscale((h, w), (target_h, target_w))
    if (h, w) == (target_h, target_w):
        return x.copy()
    return apply_separable(
        interpolation_matrix(h, target_h, kind), x, interpolation_matrix(w, target_w, kind)
    )


class _AxisFactors:
    """Per-axis matrices from which the spectral priors are assembled."""

    def __init__(self, n_src, n_dst, interp):
        c_low = dct_matrix(n_dst)[:n_src]  # first n_src DCT rows of the target size
        self.up = interpolation_matrix(n_src, n_dst, interp)
        self.src_dct = dct_matrix(n_src)
        self.low_of_up = c_low @ self.up
        self.low_synth = np.ascontiguousarray(c_low.T)


@lru_cache(maxsize=128)
def _prior_operator(src_hw, dst_hw, mode, amplitude_preserving, interp):
    """Return a callable evaluating the prior for one size pair and mode."""
    if mode in (PriorMode.NEAREST, PriorMode.LINEAR):
        rows = interpolation_matrix(src_hw[0], dst_hw[0], mode.value)
        cols = interpolation_matrix(src_hw[1], dst_hw[1], mode.value)
        return lambda x: apply_separable(rows, x, cols)

    fh = _AxisFactors(src_hw[0], dst_hw[0], interp)
    fw = _AxisFactors(src_hw[1], dst_hw[1], interp)
    alpha = amplitude_factor(src_hw, dst_hw) if amplitude_preserving else 1.0
    src_h = alpha * fh.src_dct

    if mode is PriorMode.DSE_ZERO:
        # only the embedded low band survives: C_low^T (alpha C_s x C_s^T) C_low
        return lambda x: apply_separable(
            fh.low_synth, apply_separable(src_h, x, fw.src_dct), fw.low_synth
        )

    # interpolation, minus its own low band, plus the exact coarse low band:
    #   up X up^T + S (alpha C X C^T - B X B^T) S^T
    # Heights are contracted first on the small grids; the two terms are then
    # stacked along width so the full-size output is written by one product.
    h, w = src_hw
    low_rows = np.hstack([src_h, -fh.low_of_up])
    out_cols = np.hstack([fw.up, fw.low_synth])

    def dse(x):
        if x.ndim == 2:
            return dse(x[:, :, None])[:, :, 0]
        c = x.shape[2]
        t = np.empty((2 * h, w, c))
        np.matmul(fw.src_dct, x, out=t[:h])
        np.matmul(fw.low_of_up, x, out=t[h:])
        low = low_rows @ t.reshape(2 * h, -1)
        y = np.empty((dst_hw[0], 2 * w, c))
        flat = y.reshape(dst_hw[0], -1)
        np.matmul(fh.up, x.reshape(h, -1), out=flat[:, : w * c])
        np.matmul(fh.low_synth, low, out=flat[:, w * c:])
        return np.matmul(out_cols, y)

    return dse


def build_prior(
    prev_logits,
    target_h: int,
    target_w: int,
    mode="dse",
    *,
    amplitude_preserving: bool = True,
    interp: str = "linear",
) -> np.ndarray:
    """Upsample previous-step logits into a prior at ``target_h x target_w``.

    Parameters
    ----------
    prev_logits : array of shape (h, w) or (h, w, V)
    mode : {"nearest", "linear", "dse", "dse_zero"}
    amplitude_preserving : bool
        Scale the embedded coarse band so constants stay constant. ``False``
        copies raw coefficients.
    interp : {"linear", "nearest"}
        Interpolation used for the extrapolated band of ``dse``.
    """
    x = check_grid(prev_logits, name="prev_logits")
    mode = PriorMode.parse(mode)
    target_h, target_w = check_size(target_h, target_w, "target")
    src_hw = x.shape[:2]
    check_upscale(src_hw, (target_h, target_w))
    if interp not in INTERP_KINDS:
        raise ShapeError(f"unknown interpolation kind {interp!r}")
    if src_hw == (target_h, target_w):
        return x.copy()
    op = _prior_operator(src_hw, (target_h, target_w), mode, bool(amplitude_preserving), interp)
    return op(x)


def build_prior_spectral(
    prev_logits, target_h, target_w, mode="dse", *, amplitude_preserving=True, interp="linear"
) -> np.ndarray:
    """Step-by-step transform/embed/invert construction of the spectral priors.

    Slower than :func:`build_prior`; kept as its independent reference.
    """
    x = check_grid(prev_logits, name="prev_logits")
    mode = PriorMode.parse(mode)
    if mode not in (PriorMode.DSE, PriorMode.DSE_ZERO):
        return interpolate(x, target_h, target_w, mode.value)
    check_upscale(x.shape[:2], (target_h, target_w))
    coarse = dct2(x)
    if mode is PriorMode.DSE:
        fused = dct2(interpolate(x, target_h, target_w, interp))
    else:
        fused = np.zeros((target_h, target_w) + x.shape[2:])
    fused = embed_low_band(fused, coarse, amplitude_preserving)
    return idct2(fused)


class SpectralPrior(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`build_prior`.

    ``transform`` maps coarse logits of any size not exceeding
    ``target_size`` to a prior at ``target_size``.

    Examples
    --------
    >>> import numpy as np
    >>> prior = SpectralPrior(target_size=(4, 4)).fit_transform(np.ones((2, 2, 3)))
    >>> bool(np.allclose(prior, 1.0))
    True
    """

    def __init__(self, target_size=(2, 2), mode="dse", amplitude_preserving=True, interp="linear"):
        self.target_size = target_size
        self.mode = mode
        self.amplitude_preserving = amplitude_preserving
        self.interp = interp

    def fit(self, X, y=None):
        x = check_grid(X, name="X")
        PriorMode.parse(self.mode)
        check_upscale(x.shape[:2], tuple(self.target_size))
        self.n_channels_in_ = 1 if x.ndim == 2 else x.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_channels_in_")
        return build_prior(
            X,
            *self.target_size,
            mode=self.mode,
            amplitude_preserving=self.amplitude_preserving,
            interp=self.interp,
        )
