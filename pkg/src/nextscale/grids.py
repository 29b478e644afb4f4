"""Grid persistence: the NSGT binary tensor format, 8-bit PGM/PPM images and CSV.

Grids are plain numpy arrays: ``(h, w)`` for single-channel grids and
channel-last ``(h, w, c)`` for feature fields and logit fields. Token maps
are ``(h, w)`` integer arrays.

NSGT layout (all little-endian)::

    bytes 0-3    magic b"NSGT"
    bytes 4-7    u32 header word: ndim (=3) in the low 16 bits, bit 31 set
                 for an integer payload
    bytes 8-19   u32 dims h, w, c
    bytes 20-    h*w*c payload values, row-major (h, w, c); f64 for real
                 tensors, u32 for token maps (stored with c == 1)
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np

from ._validation import check_grid, check_tokens
from .exceptions import DomainError, FormatError, PersistenceError, ShapeError

MAGIC = b"NSGT"
INT_PAYLOAD = 0x8000_0000
_HEADER = struct.Struct("<4sI3I")


def _write_bytes(path, blob: bytes) -> None:
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc


def _as3d(grid: np.ndarray) -> np.ndarray:
    return grid[:, :, None] if grid.ndim == 2 else grid


def save_tensor(grid, path) -> None:
    """Write a finite ``(h, w, c)`` (or ``(h, w)``) float grid as NSGT."""
    arr = _as3d(check_grid(grid, name="tensor"))
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    _write_bytes(path, _HEADER.pack(MAGIC, 3, h, w, c) + payload)


def save_tokens(tokens, path) -> None:
    """Write an ``(h, w)`` token map as NSGT with the integer payload flag."""
    arr = check_tokens(tokens)
    if arr.size and arr.max() >= 2**32:
        raise DomainError("token index does not fit in u32")
    h, w = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<u4").tobytes()
    _write_bytes(path, _HEADER.pack(MAGIC, 3 | INT_PAYLOAD, h, w, 1) + payload)


def _parse(blob: bytes, path):
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, word, h, w, c = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    is_int = bool(word & INT_PAYLOAD)
    ndim = word & 0xFFFF
    if ndim != 3 or word & ~(INT_PAYLOAD | 0xFFFF):
        raise FormatError(f"{path}: unsupported header word {word:#x}")
    if min(h, w, c) < 1:
        raise FormatError(f"{path}: zero-sized dimension {h}x{w}x{c}")
    itemsize = 4 if is_int else 8
    expected = h * w * c * itemsize
    body = blob[_HEADER.size :]
    if len(body) != expected:
        raise FormatError(
            f"{path}: dims {h}x{w}x{c} need {expected} payload bytes, found {len(body)}"
        )
    dtype = "<u4" if is_int else "<f8"
    return is_int, np.frombuffer(body, dtype=dtype).reshape(h, w, c)


def load_tensor(path) -> np.ndarray:
    """Read a float NSGT file into an ``(h, w, c)`` float64 array."""
    is_int, arr = _parse(_read_bytes(path), path)
    if is_int:
        raise FormatError(f"{path}: holds a token map, not a real tensor")
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite payload")
    return arr


def load_tokens(path) -> np.ndarray:
    is_int, arr = _parse(_read_bytes(path), path)
    if not is_int:
        raise FormatError(f"{path}: holds a real tensor, not a token map")
    if arr.shape[2] != 1:
        raise FormatError(f"{path}: token maps must have c == 1")
    return arr[:, :, 0].astype(np.int64)


# -- images -----------------------------------------------------------------


def write_image(grid, path) -> None:
    """Write a grid as binary PGM (2-D or one channel) or PPM (three channels).

    Values are clamped to [0, 1] and rounded to 8 bits.
    """
    arr = check_grid(grid, name="image")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise ShapeError(f"images need 1 or 3 channels, got {arr.shape[2]}")
    pixels = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    kind = b"P5" if arr.ndim == 2 else b"P6"
    h, w = arr.shape[:2]
    _write_bytes(path, kind + b"\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def _header_tokens(blob: bytes, count: int, path):
    tokens, pos = [], 2
    while len(tokens) < count:
        if pos >= len(blob):
            raise FormatError(f"{path}: truncated image header")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            nl = blob.find(b"\n", pos)
            pos = len(blob) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos : pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_image(path) -> np.ndarray:
    """Read a binary PGM/PPM (maxval 255) into [0, 1] floats."""
    blob = _read_bytes(path)
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM (magic {magic!r})")
    tokens, start = _header_tokens(blob, 3, path)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: malformed header {tokens!r}") from None
    if maxval != 255 or w < 1 or h < 1:
        raise FormatError(f"{path}: unsupported header w={w} h={h} maxval={maxval}")
    channels = 1 if magic == b"P5" else 3
    raster = blob[start : start + w * h * channels]
    if len(raster) != w * h * channels:
        raise FormatError(f"{path}: truncated raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(h, w) if channels == 1 else pixels.reshape(h, w, 3)


# -- csv --------------------------------------------------------------------


def format_value(v) -> str:
    """Render a CSV cell; floats use ``repr`` so values round-trip exactly."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    """Write a header row plus data rows with '\\n' line endings."""
    try:
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], rows[1:]
