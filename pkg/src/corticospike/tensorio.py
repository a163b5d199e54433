"""Binary tensor files.

Layout: magic ``AADT`` (4 bytes), version u8, dtype code u8 (0 = float32,
1 = int16), ndim u8, one little-endian u32 per dimension, then the payload
as row-major little-endian values. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError, TensorFormatError

__all__ = ["MAGIC", "VERSION", "write_tensor", "read_tensor"]

MAGIC = b"AADT"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<i2")}
_MAX_NDIM = 8


def _encode_dtype(array: np.ndarray) -> tuple[int, np.ndarray]:
    if array.dtype == np.float32:
        return 0, array.astype("<f4", copy=False)
    if array.dtype == np.int16:
        return 1, array.astype("<i2", copy=False)
    if np.issubdtype(array.dtype, np.floating):
        return 0, array.astype("<f4")
    if np.issubdtype(array.dtype, np.integer) or array.dtype == np.bool_:
        as64 = array.astype(np.int64)
        if as64.size and (as64.max() > 32767 or as64.min() < -32768):
            raise DataError("integer values exceed the int16 range")
        return 1, as64.astype("<i2")
    raise DataError(f"unsupported array dtype {array.dtype}")


def write_tensor(path, array: np.ndarray) -> None:
    """Write an array as a tensor file (float arrays as float32, ints as int16)."""
    array = np.asarray(array)
    if np.issubdtype(array.dtype, np.floating) and not np.all(np.isfinite(array)):
        raise DataError("tensor values must be finite")
    code, data = _encode_dtype(array)
    if array.ndim == 0 or array.ndim > _MAX_NDIM:
        raise DataError(f"ndim must be in 1..{_MAX_NDIM}, got {array.ndim}")
    header = MAGIC + struct.pack("<BBB", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(data).tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor file, validating every header field."""
    raw = Path(path).read_bytes()
    if len(raw) < 7:
        raise TensorFormatError("magic", f"{path}: file too short for a tensor header")
    if raw[:4] != MAGIC:
        raise TensorFormatError("magic", f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, code, ndim = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise TensorFormatError("version", f"{path}: unsupported version {version}")
    if code not in _DTYPE_CODES:
        raise TensorFormatError("dtype", f"{path}: unknown dtype code {code}")
    if not 1 <= ndim <= _MAX_NDIM:
        raise TensorFormatError("ndim", f"{path}: ndim {ndim} outside 1..{_MAX_NDIM}")
    offset = 7 + 4 * ndim
    if len(raw) < offset:
        raise TensorFormatError("dims", f"{path}: truncated dimension list")
    dims = struct.unpack_from(f"<{ndim}I", raw, 7)
    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(raw) - offset != expected:
        raise TensorFormatError(
            "payload",
            f"{path}: payload is {len(raw) - offset} bytes, dims {dims} require {expected}",
        )
    return np.frombuffer(raw, dtype=dtype, offset=offset).reshape(dims).copy()
