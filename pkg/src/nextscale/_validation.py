"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import DomainError, ShapeError


def check_grid(x, ndim=None, name="grid", copy=False) -> np.ndarray:
    """Return ``x`` as a finite float64 array with 2 or 3 dimensions.

    ``ndim`` restricts the accepted rank; ``None`` accepts both 2-D
    ``(h, w)`` grids and channel-last 3-D ``(h, w, c)`` grids.
    """
    arr = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    allowed = (2, 3) if ndim is None else (ndim,)
    if arr.ndim not in allowed:
        raise ShapeError(f"{name} must have ndim in {allowed}, got shape {arr.shape}")
    if any(s < 1 for s in arr.shape):
        raise ShapeError(f"{name} has an empty axis: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")


def check_vectors(*arrays, names=None):
    """Coerce 1-D (or flattened) float vectors and require equal length."""
    out = [np.asarray(a, dtype=np.float64).ravel() for a in arrays]
    sizes = {v.size for v in out}
    if len(sizes) != 1:
        names = names or [f"arg{i}" for i in range(len(out))]
        detail = ", ".join(f"{n}={v.size}" for n, v in zip(names, out))
        raise ShapeError(f"length mismatch: {detail}")
    return out


def check_size(h, w, name="size") -> tuple[int, int]:
    h, w = int(h), int(w)
    if h < 1 or w < 1:
        raise ShapeError(f"{name} must be positive, got {h}x{w}")
    return h, w


def check_upscale(src_hw, dst_hw) -> None:
    if dst_hw[0] < src_hw[0] or dst_hw[1] < src_hw[1]:
        raise ShapeError(
            f"target {dst_hw[0]}x{dst_hw[1]} is smaller than source "
            f"{src_hw[0]}x{src_hw[1]} on some axis; only upscaling is supported"
        )


def check_tokens(tokens, vocab_size=None, name="tokens") -> np.ndarray:
    arr = np.asarray(tokens)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D map, got shape {arr.shape}")
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise DomainError(f"{name} must hold integer indices")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and arr.min() < 0:
        raise DomainError(f"{name} has negative indices")
    if vocab_size is not None and arr.size and arr.max() >= vocab_size:
        raise DomainError(f"{name} index {arr.max()} out of range for vocabulary {vocab_size}")
    return arr


def parse_size(text: str) -> tuple[int, ...]:
    """Parse ``"HxW"`` or ``"HxWxC"`` into a tuple of positive ints."""
    try:
        parts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ShapeError(f"cannot parse size {text!r}") from None
    if len(parts) not in (2, 3) or any(p < 1 for p in parts):
        raise ShapeError(f"cannot parse size {text!r}")
    return parts
