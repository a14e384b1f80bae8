"""Randomized patch features: cuboid mean differences, an LBP-like texture
code on multichannel feature volumes, and per-voxel class likelihoods.

Patch coordinates always live on the CT voxel grid.  Feature-volume lookups
map CT-grid positions to the feature grid by nearest neighbor in world
coordinates, so volumes at halved resolution (doubled spacing) line up.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, FormatError, ValidationError
from .volume import (
    FeatureVolume,
    IntegralVolume,
    ScalarVolume,
    cuboid_mean,
    index_to_world,
    world_to_index,
)

PLANES = ("axial", "coronal", "sagittal")

# LBP neighbor blocks enumerated from the top-left, clockwise: bit k set
# iff the mean of block k is >= the center block mean.
_LBP_ORDER = ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0))


@dataclass(frozen=True)
class Patch:
    center: tuple[int, int, int]  # (vx, vy, vz) voxel index
    size: int  # edge length p, odd

    def __post_init__(self):
        if self.size % 2 == 0 or self.size < 3:
            raise ValidationError(f"patch size must be odd and >= 3, got {self.size}")

    @property
    def corner(self) -> tuple[int, int, int]:
        h = self.size // 2
        return tuple(c - h for c in self.center)


def _check_patch(patch: Patch, dims) -> None:
    for c, lo, n in zip(patch.center, patch.corner, dims):
        if lo < 0 or lo + patch.size > n:
            raise BoundsError(f"patch at {patch.center} (p={patch.size}) leaves dims {dims}")


@dataclass(frozen=True)
class CuboidSpec:
    """Inclusive lo/hi voxel offsets relative to the patch corner, within [0, p)^3."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def validate(self, p: int) -> None:
        for a, b in zip(self.lo, self.hi):
            if not (0 <= a <= b < p):
                raise ValidationError(f"cuboid {self.lo}..{self.hi} not inside [0,{p})^3")


@dataclass(frozen=True)
class FeatureDescriptor:
    kind: str  # 'diff1' | 'diff2' | 'lbp' | 'likelihood'
    cuboids: tuple[CuboidSpec, ...] = ()
    plane: str = ""  # lbp only
    channel: int = -1  # lbp / likelihood


@dataclass(frozen=True)
class FeatureBank:
    descriptors: tuple[FeatureDescriptor, ...]
    patch_size: int
    seed: int
    channels: int

    def __len__(self) -> int:
        return len(self.descriptors)

    def fingerprint(self) -> str:
        return hashlib.sha256(serialize_bank(self).encode()).hexdigest()


def _sample_cuboid(rng: np.random.Generator, p: int) -> CuboidSpec:
    lo = rng.integers(0, p, size=3)
    hi = rng.integers(0, p, size=3)
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    return CuboidSpec(tuple(int(v) for v in lo), tuple(int(v) for v in hi))


def sample_bank(seed, n_diff1, n_diff2, n_lbp, n_lik, p, channels) -> FeatureBank:
    if p % 2 == 0 or p < 3:
        raise ValidationError(f"patch size must be odd and >= 3, got {p}")
    if min(n_diff1, n_diff2, n_lbp, n_lik) < 0:
        raise ValidationError("descriptor counts must be >= 0")
    if (n_lbp > 0 or n_lik > 0) and channels < 1:
        raise ValidationError("lbp/likelihood descriptors need channels >= 1")
    if n_lik > 0 and channels != 8:
        raise ValidationError("likelihood descriptors need an 8-channel feature volume")
    rng = np.random.Generator(np.random.PCG64(seed))
    desc: list[FeatureDescriptor] = []
    for _ in range(n_diff1):
        desc.append(
            FeatureDescriptor("diff1", (_sample_cuboid(rng, p), _sample_cuboid(rng, p)))
        )
    for _ in range(n_diff2):
        desc.append(
            FeatureDescriptor(
                "diff2",
                (_sample_cuboid(rng, p), _sample_cuboid(rng, p), _sample_cuboid(rng, p)),
            )
        )
    for _ in range(n_lbp):
        plane = PLANES[int(rng.integers(0, 3))]
        channel = int(rng.integers(0, channels))
        desc.append(FeatureDescriptor("lbp", plane=plane, channel=channel))
    for _ in range(n_lik):
        desc.append(FeatureDescriptor("likelihood", channel=int(rng.integers(0, 8))))
    return FeatureBank(tuple(desc), patch_size=p, seed=seed, channels=channels)


def eval_diff1(iv: IntegralVolume, patch: Patch, f1: CuboidSpec, f2: CuboidSpec) -> float:
    """mean(F1) - mean(F2), cuboids anchored at the patch corner."""
    _check_patch(patch, iv.dims)
    c = patch.corner
    m1 = cuboid_mean(iv, tuple(c[i] + f1.lo[i] for i in range(3)),
                     tuple(c[i] + f1.hi[i] for i in range(3)))
    m2 = cuboid_mean(iv, tuple(c[i] + f2.lo[i] for i in range(3)),
                     tuple(c[i] + f2.hi[i] for i in range(3)))
    return m1 - m2


def eval_diff2(
    iv: IntegralVolume, patch: Patch, f1: CuboidSpec, f2: CuboidSpec, f3: CuboidSpec
) -> float:
    """mean(F1) + mean(F2) - 2 * mean(F3)."""
    _check_patch(patch, iv.dims)
    c = patch.corner
    means = []
    for f in (f1, f2, f3):
        means.append(
            cuboid_mean(iv, tuple(c[i] + f.lo[i] for i in range(3)),
                        tuple(c[i] + f.hi[i] for i in range(3)))
        )
    return means[0] + means[1] - 2.0 * means[2]


def _slice_on_feature_grid(
    fvol: FeatureVolume, patch: Patch, plane: str, channel: int, ct_spacing
) -> np.ndarray:
    """p x p slice of one channel through the patch center, sampled by
    nearest neighbor in world coordinates."""
    if channel < 0 or channel >= fvol.channels:
        raise BoundsError(f"channel {channel} out of range for C={fvol.channels}")
    p = patch.size
    h = p // 2
    vx, vy, vz = patch.center
    if plane == "axial":  # constant z, axes (y, x)
        rows = np.arange(vy - h, vy + h + 1)
        cols = np.arange(vx - h, vx + h + 1)
        row_axis, col_axis, fixed_axis, fixed = 1, 0, 2, vz
    elif plane == "coronal":  # constant y, axes (z, x)
        rows = np.arange(vz - h, vz + h + 1)
        cols = np.arange(vx - h, vx + h + 1)
        row_axis, col_axis, fixed_axis, fixed = 2, 0, 1, vy
    elif plane == "sagittal":  # constant x, axes (z, y)
        rows = np.arange(vz - h, vz + h + 1)
        cols = np.arange(vy - h, vy + h + 1)
        row_axis, col_axis, fixed_axis, fixed = 2, 1, 0, vx
    else:
        raise ValidationError(f"unknown plane {plane!r}")

    dims = fvol.dims
    sp = fvol.spacing

    def map_axis(idx, axis):
        world = (np.asarray(idx, dtype=np.float64) + 0.5) * ct_spacing[axis]
        j = np.rint(world / sp[axis] - 0.5).astype(np.int64)
        return np.clip(j, 0, dims[axis] - 1)

    fr = map_axis(rows, row_axis)
    fc = map_axis(cols, col_axis)
    ff = int(map_axis([fixed], fixed_axis)[0])
    chan = fvol.data[channel]
    if plane == "axial":
        return chan[ff][np.ix_(fr, fc)]
    if plane == "coronal":
        return chan[:, ff, :][np.ix_(fr, fc)]
    return chan[:, :, ff][np.ix_(fr, fc)]


def lbp_code_2d(img: np.ndarray) -> int:
    """8-bit LBP code of a square 2D image from a 3x3 grid of block means.

    Uses the largest multiple-of-3 square anchored at the top-left corner;
    bit k is 1 iff the mean of neighbor block k (top-left, clockwise) is >=
    the center block mean.
    """
    p = img.shape[0]
    g = 3 * (p // 3)
    if g < 3:
        raise ValidationError(f"image edge {p} too small for a 3x3 block grid")
    b = g // 3
    blocks = img[:g, :g].reshape(3, b, 3, b).mean(axis=(1, 3))
    center = blocks[1, 1]
    code = 0
    for k, (r, c) in enumerate(_LBP_ORDER):
        if blocks[r, c] >= center:
            code |= 1 << k
    return code


def eval_lbp(
    fvol: FeatureVolume, patch: Patch, plane: str, channel: int, ct_spacing=None
) -> int:
    """LBP-like texture code of the patch slice on the chosen plane/channel."""
    if ct_spacing is None:
        ct_spacing = fvol.spacing
    img = _slice_on_feature_grid(fvol, patch, plane, channel, ct_spacing)
    return lbp_code_2d(np.asarray(img, dtype=np.float64))


def eval_likelihood(fvol: FeatureVolume, v, channel: int, ct_spacing=None) -> float:
    """Stored per-voxel class likelihood at the patch center, no interpolation."""
    if fvol.channels != 8:
        raise ValidationError("likelihood features need an 8-channel volume")
    if channel < 0 or channel >= 8:
        raise BoundsError(f"likelihood channel {channel} out of range")
    if ct_spacing is None:
        ct_spacing = fvol.spacing
    world = index_to_world(v, ct_spacing)
    ix, iy, iz = world_to_index(world, fvol.spacing, fvol.dims)
    return float(fvol.data[channel, iz, iy, ix])


def feature_vector(
    ct: ScalarVolume | IntegralVolume,
    fvol: FeatureVolume | None,
    bank: FeatureBank,
    patch: Patch,
    ct_spacing=None,
) -> np.ndarray:
    """Evaluate every bank descriptor on one patch.

    Pass the CT's IntegralVolume (with ct_spacing) when evaluating many
    patches; a bare ScalarVolume is accepted and integrated on the fly.
    """
    if isinstance(ct, ScalarVolume):
        if ct_spacing is None:
            ct_spacing = ct.spacing
        iv = IntegralVolume(ct)
    else:
        iv = ct
        if ct_spacing is None:
            raise ValidationError("ct_spacing is required with an IntegralVolume")
    out = np.empty(len(bank), dtype=np.float64)
    for i, d in enumerate(bank.descriptors):
        if d.kind == "diff1":
            out[i] = eval_diff1(iv, patch, *d.cuboids)
        elif d.kind == "diff2":
            out[i] = eval_diff2(iv, patch, *d.cuboids)
        elif d.kind == "lbp":
            out[i] = eval_lbp(fvol, patch, d.plane, d.channel, ct_spacing)
        elif d.kind == "likelihood":
            out[i] = eval_likelihood(fvol, patch.center, d.channel, ct_spacing)
        else:
            raise ValidationError(f"unknown descriptor kind {d.kind!r}")
    return out


BANK_FORMAT = "FBANK 1"


def serialize_bank(bank: FeatureBank) -> str:
    lines = [
        BANK_FORMAT,
        f"seed {bank.seed}",
        f"p {bank.patch_size}",
        f"channels {bank.channels}",
        f"count {len(bank)}",
    ]
    for d in bank.descriptors:
        if d.kind in ("diff1", "diff2"):
            parts = [d.kind]
            for c in d.cuboids:
                parts.extend(str(v) for v in (*c.lo, *c.hi))
            lines.append(" ".join(parts))
        elif d.kind == "lbp":
            lines.append(f"lbp {d.plane} {d.channel}")
        else:
            lines.append(f"likelihood {d.channel}")
    return "\n".join(lines) + "\n"


def deserialize_bank(text: str) -> FeatureBank:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != BANK_FORMAT:
        raise FormatError("not a feature bank file")
    header = {}
    for ln in lines[1:5]:
        key, val = ln.split()
        header[key] = int(val)
    desc: list[FeatureDescriptor] = []
    for ln in lines[5:]:
        parts = ln.split()
        kind = parts[0]
        if kind in ("diff1", "diff2"):
            nums = [int(v) for v in parts[1:]]
            n_cub = 2 if kind == "diff1" else 3
            if len(nums) != 6 * n_cub:
                raise FormatError(f"bad cuboid line: {ln!r}")
            cubs = tuple(
                CuboidSpec(tuple(nums[6 * i : 6 * i + 3]), tuple(nums[6 * i + 3 : 6 * i + 6]))
                for i in range(n_cub)
            )
            desc.append(FeatureDescriptor(kind, cubs))
        elif kind == "lbp":
            desc.append(FeatureDescriptor("lbp", plane=parts[1], channel=int(parts[2])))
        elif kind == "likelihood":
            desc.append(FeatureDescriptor("likelihood", channel=int(parts[1])))
        else:
            raise FormatError(f"unknown descriptor kind {kind!r}")
    if len(desc) != header["count"]:
        raise FormatError("descriptor count mismatch")
    return FeatureBank(
        tuple(desc), patch_size=header["p"], seed=header["seed"], channels=header["channels"]
    )
