"""Core 3D volume types, VOLF1 file I/O, and integral volumes for cuboid sums.

Arrays are stored in C order with axes (z, y, x) for scalar volumes and
(c, z, y, x) for multichannel volumes, so the flat layout is x-fastest,
then y, then z, one full scalar volume per channel (channel-major).

World coordinates use the voxel-center convention: the world position of
voxel index i along an axis with spacing s is (i + 0.5) * s millimeters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, CorruptionError, FormatError, ValidationError

MAGIC = b"VOLF"
VERSION = 1

# dtype code <-> numpy dtype (all little-endian on disk)
_DTYPE_CODES = {0: np.dtype("<u1"), 1: np.dtype("<i2"), 2: np.dtype("<f4")}
_DTYPE_NAMES = {0: "u8", 1: "i16", 2: "f32"}
_NAME_TO_CODE = {v: k for k, v in _DTYPE_NAMES.items()}

_HEADER = struct.Struct("<4sIIIIIIddd")


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]  # (nx, ny, nz)
    channels: int
    spacing: tuple[float, float, float]  # mm per voxel, (sx, sy, sz)
    dtype: str  # one of 'u8', 'i16', 'f32'

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 1:
            raise ValidationError(f"dims must be >= 1, got {self.dims}")
        if self.channels < 1:
            raise ValidationError(f"channels must be >= 1, got {self.channels}")
        for s in self.spacing:
            if not (np.isfinite(s) and s > 0):
                raise ValidationError(f"spacing must be finite and positive, got {self.spacing}")
        if self.dtype not in _NAME_TO_CODE:
            raise ValidationError(f"unsupported dtype {self.dtype!r}")

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


class ScalarVolume:
    """Single-channel volume; data has shape (nz, ny, nx)."""

    def __init__(self, header: VolumeHeader, data: np.ndarray):
        if header.channels != 1:
            raise ValidationError("ScalarVolume requires channels == 1")
        nx, ny, nz = header.dims
        data = np.ascontiguousarray(data).reshape(nz, ny, nx)
        if header.dtype == "f32" and not np.all(np.isfinite(data)):
            raise ValidationError("f32 volume contains non-finite samples")
        self.header = header
        self.data = data
        self.data.flags.writeable = False

    @property
    def dims(self):
        return self.header.dims

    @property
    def spacing(self):
        return self.header.spacing


class FeatureVolume:
    """C-channel volume; data has shape (C, nz, ny, nx), channel-major."""

    def __init__(self, header: VolumeHeader, data: np.ndarray):
        if header.channels < 1:
            raise ValidationError("FeatureVolume requires channels >= 1")
        nx, ny, nz = header.dims
        data = np.ascontiguousarray(data).reshape(header.channels, nz, ny, nx)
        self.header = header
        self.data = data
        self.data.flags.writeable = False

    @property
    def dims(self):
        return self.header.dims

    @property
    def channels(self):
        return self.header.channels

    @property
    def spacing(self):
        return self.header.spacing


Volume = ScalarVolume | FeatureVolume


def make_volume(header: VolumeHeader, data: np.ndarray) -> Volume:
    return ScalarVolume(header, data) if header.channels == 1 else FeatureVolume(header, data)


def index_to_world(index, spacing) -> np.ndarray:
    """World mm position of a voxel index triple (voxel-center convention)."""
    return (np.asarray(index, dtype=np.float64) + 0.5) * np.asarray(spacing, dtype=np.float64)


def world_to_index(world, spacing, dims) -> np.ndarray:
    """Nearest voxel index for a world mm position, clamped into bounds."""
    idx = np.rint(np.asarray(world, dtype=np.float64) / np.asarray(spacing) - 0.5).astype(np.int64)
    return np.clip(idx, 0, np.asarray(dims, dtype=np.int64) - 1)


def save_volume(vol: Volume, path) -> None:
    header = vol.header
    nx, ny, nz = header.dims
    code = _NAME_TO_CODE[header.dtype]
    disk_dtype = _DTYPE_CODES[code]
    raw = np.ascontiguousarray(vol.data, dtype=disk_dtype)
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                MAGIC, VERSION, code, nx, ny, nz, header.channels, *header.spacing
            )
        )
        f.write(raw.tobytes())


def load_volume(path) -> Volume:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise CorruptionError(f"{path}: truncated header")
        magic, version, code, nx, ny, nz, channels, sx, sy, sz = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if code not in _DTYPE_CODES:
            raise FormatError(f"{path}: unknown dtype code {code}")
        header = VolumeHeader(
            dims=(nx, ny, nz), channels=channels, spacing=(sx, sy, sz), dtype=_DTYPE_NAMES[code]
        )
        disk_dtype = _DTYPE_CODES[code]
        expected = channels * nx * ny * nz * disk_dtype.itemsize
        payload = f.read()
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=disk_dtype)
    if channels == 1:
        return ScalarVolume(header, data.reshape(nz, ny, nx))
    return FeatureVolume(header, data.reshape(channels, nz, ny, nx))


class IntegralVolume:
    """Cumulative-sum volume, one larger than the source along every axis.

    table[z, y, x] is the double-precision sum of all source voxels with
    index strictly below (x, y, z) componentwise; any zero-index plane is 0.
    """

    def __init__(self, source: ScalarVolume):
        nz, ny, nx = source.data.shape
        table = np.zeros((nz + 1, ny + 1, nx + 1), dtype=np.float64)
        table[1:, 1:, 1:] = source.data.astype(np.float64).cumsum(0).cumsum(1).cumsum(2)
        self.table = table
        self.dims = source.header.dims  # source dims (nx, ny, nz)
        self.table.flags.writeable = False


def build_integral(v: ScalarVolume) -> IntegralVolume:
    return IntegralVolume(v)


def cuboid_sum(iv: IntegralVolume, lo, hi) -> float:
    """Sum of voxels in the half-open cuboid [lo, hi); zero-extent boxes sum to 0."""
    x0, y0, z0 = (int(c) for c in lo)
    x1, y1, z1 = (int(c) for c in hi)
    nx, ny, nz = iv.dims
    if not (0 <= x0 <= x1 <= nx and 0 <= y0 <= y1 <= ny and 0 <= z0 <= z1 <= nz):
        raise BoundsError(f"cuboid [{lo}, {hi}) out of bounds for dims {iv.dims}")
    t = iv.table
    return float(
        t[z1, y1, x1]
        - t[z0, y1, x1]
        - t[z1, y0, x1]
        - t[z1, y1, x0]
        + t[z0, y0, x1]
        + t[z0, y1, x0]
        + t[z1, y0, x0]
        - t[z0, y0, x0]
    )


def cuboid_mean(iv: IntegralVolume, lo, hi) -> float:
    """Mean of voxels in the inclusive cuboid [lo, hi] (single voxel when lo == hi)."""
    lo = tuple(int(c) for c in lo)
    hi = tuple(int(c) for c in hi)
    if any(a > b for a, b in zip(lo, hi)):
        raise BoundsError(f"cuboid lo {lo} exceeds hi {hi}")
    count = 1
    for a, b in zip(lo, hi):
        count *= b - a + 1
    return cuboid_sum(iv, lo, tuple(c + 1 for c in hi)) / count
