"""Minimal VOLF1 reader/writer.

Format (little-endian): magic `VOLF`, version u32 = 1, dtype u32
(0=u8, 1=i16, 2=f32), nx, ny, nz u32, channels u32, sx, sy, sz f64,
then raw samples channel-major, x-fastest (C order over (c, z, y, x)).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

_HEADER = struct.Struct("<4sIIIIIIddd")
_MAGIC = b"VOLF"
_VERSION = 1
_CODES = {0: np.dtype("<u1"), 1: np.dtype("<i2"), 2: np.dtype("<f4")}
_CODE_OF = {np.dtype(np.uint8): 0, np.dtype(np.int16): 1, np.dtype(np.float32): 2}


@dataclass(frozen=True)
class Volf:
    dims: tuple[int, int, int]  # (nx, ny, nz)
    channels: int
    spacing: tuple[float, float, float]
    data: np.ndarray  # (channels, nz, ny, nx)


def read_volf(path) -> Volf:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, code, nx, ny, nz, channels, sx, sy, sz = _HEADER.unpack(head)
        if magic != _MAGIC or version != _VERSION:
            raise FormatError(f"{path}: not a VOLF1 file")
        if code not in _CODES:
            raise FormatError(f"{path}: unknown dtype code {code}")
        dtype = _CODES[code]
        payload = f.read()
    expected = channels * nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=dtype).reshape(channels, nz, ny, nx)
    return Volf(dims=(nx, ny, nz), channels=channels, spacing=(sx, sy, sz), data=data)


def write_volf(path, data: np.ndarray, spacing) -> None:
    """data: (channels, nz, ny, nx); dtype must be u8, i16, or f32."""
    if data.ndim != 4:
        raise FormatError(f"expected a (c, nz, ny, nx) array, got shape {data.shape}")
    dtype = np.dtype(data.dtype)
    if dtype not in _CODE_OF:
        raise FormatError(f"unsupported dtype {dtype}")
    channels, nz, ny, nx = data.shape
    sx, sy, sz = (float(s) for s in spacing)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, _VERSION, _CODE_OF[dtype], nx, ny, nz, channels, sx, sy, sz))
        f.write(np.ascontiguousarray(data).tobytes())
