"""Strict NPY v1.0 reading and writing.

The on-disk tensor format is pinned: magic ``\\x93NUMPY``, version (1, 0),
a python-literal header dict, little-endian payload. Feature tensors must
be ``<f4``, C-order, 3-D; binary masks ``|u1``, C-order, 2-D. Anything
else is rejected rather than coerced, so the reader is written against the
byte layout directly instead of delegating to ``np.load``.
"""

from __future__ import annotations

import ast
from pathlib import Path

import numpy as np

from .errors import FormatError, UnsupportedEncodingError, ValidationError, WriteError

_MAGIC = b"\x93NUMPY"


def _read_header(raw: bytes, path: Path) -> tuple[dict, int]:
    """Parse the v1.0 header; returns (header dict, payload offset)."""
    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic)")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise UnsupportedEncodingError(f"{path}: NPY version {major}.{minor}, expected 1.0")
    hlen = int.from_bytes(raw[8:10], "little")
    if len(raw) < 10 + hlen:
        raise FormatError(f"{path}: truncated header")
    header_text = raw[10 : 10 + hlen].decode("latin1")
    try:
        header = ast.literal_eval(header_text)
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: malformed header dict: {exc}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: header must declare descr, fortran_order, shape")
    return header, 10 + hlen


def _read_array(path: str | Path, descr: str, ndim: int, dtype: np.dtype) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    header, offset = _read_header(raw, path)
    if header["descr"] != descr:
        raise UnsupportedEncodingError(
            f"{path}: dtype {header['descr']!r}, expected {descr!r}"
        )
    if header["fortran_order"] is not False:
        raise UnsupportedEncodingError(f"{path}: fortran_order must be False (C order)")
    shape = header["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) != ndim
        or not all(isinstance(s, int) and s > 0 for s in shape)
    ):
        raise ValidationError(f"{path}: expected {ndim}-D positive shape, got {shape!r}")
    count = int(np.prod(shape))
    payload = raw[offset:]
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    data = np.frombuffer(payload, dtype=dtype)
    return data.reshape(shape).copy()


def _write_array(arr: np.ndarray, path: str | Path, descr: str) -> None:
    path = Path(path)
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        descr,
        repr(tuple(int(s) for s in arr.shape)),
    )
    # pad so magic + version + length + header is a multiple of 64,
    # terminated by newline
    unpadded = 10 + len(header) + 1
    pad = (64 - unpadded % 64) % 64
    header = header + " " * pad + "\n"
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(bytes((1, 0)))
            fh.write(len(header).to_bytes(2, "little"))
            fh.write(header.encode("latin1"))
            fh.write(np.ascontiguousarray(arr).tobytes())
    except OSError as exc:
        raise WriteError(f"{path}: {exc}") from exc


def read_f32_3d(path: str | Path) -> np.ndarray:
    """Read a (C, H, W) float32 tensor; rejects non-finite payloads."""
    arr = _read_array(path, "<f4", 3, np.dtype("<f4"))
    if not np.isfinite(arr).all():
        raise ValidationError(f"{path}: tensor contains NaN or Inf")
    return arr


def write_f32_3d(arr: np.ndarray, path: str | Path) -> None:
    if arr.ndim != 3 or any(s <= 0 for s in arr.shape):
        raise ValidationError(f"expected 3-D positive shape, got {arr.shape}")
    if arr.dtype != np.float32:
        raise ValidationError(f"expected float32 data, got {arr.dtype}")
    if not np.isfinite(arr).all():
        raise ValidationError("tensor contains NaN or Inf")
    _write_array(arr, path, "<f4")


def read_f32_2d(path: str | Path) -> np.ndarray:
    """Read a 2-D float32 grid (anomaly maps, sampled cell matrices)."""
    return _read_array(path, "<f4", 2, np.dtype("<f4"))


def write_f32_2d(arr: np.ndarray, path: str | Path) -> None:
    if arr.ndim != 2:
        raise ValidationError(f"expected 2-D data, got shape {arr.shape}")
    _write_array(np.asarray(arr, dtype="<f4"), path, "<f4")


def read_mask(path: str | Path) -> np.ndarray:
    """Read a 2-D uint8 binary mask; any nonzero counts as anomalous."""
    arr = _read_array(path, "|u1", 2, np.dtype("u1"))
    return (arr != 0).astype(np.uint8)


def write_mask(arr: np.ndarray, path: str | Path) -> None:
    if arr.ndim != 2:
        raise ValidationError(f"expected 2-D mask, got shape {arr.shape}")
    _write_array((np.asarray(arr) != 0).astype("u1"), path, "|u1")
