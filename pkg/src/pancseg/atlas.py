"""Probabilistic atlas in normalized bounding-box coordinates: training masks
resampled into [0,1]^3, averaged, and projected back into an estimated box.

Atlas cell centers sit at ((i + 0.5) / G) in normalized coordinates; all
resampling is trilinear with zero outside the sampled grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .geometry import BoundingBox
from .volume import ScalarVolume, VolumeHeader

DEFAULT_GRID = 64
DEFAULT_MARGIN_MM = 10.0


@dataclass(frozen=True)
class ProbAtlas:
    grid: np.ndarray  # (G, G, G) float64 in [0, 1], axes (z, y, x)
    n_cases: int

    def __post_init__(self):
        if self.n_cases < 1:
            raise ValidationError("atlas needs at least one case")
        if self.grid.min() < 0 or self.grid.max() > 1:
            raise ValidationError("atlas values must lie in [0, 1]")

    @property
    def resolution(self) -> int:
        return self.grid.shape[0]


def _trilinear(volume: np.ndarray, coords_zyx: np.ndarray, mode="constant") -> np.ndarray:
    """Trilinear sample at continuous (z, y, x) index coordinates."""
    return ndimage.map_coordinates(
        volume.astype(np.float64), coords_zyx, order=1, mode=mode, cval=0.0
    )


def _sample_mask_in_box(mask: np.ndarray, spacing, box: BoundingBox, grid: int) -> np.ndarray:
    """Mask occupancy at the G^3 normalized-box cell centers of one case."""
    u = (np.arange(grid, dtype=np.float64) + 0.5) / grid
    lo, size = box.lo, box.size
    # world mm positions of cell centers, per axis
    wx = lo[0] + u * size[0]
    wy = lo[1] + u * size[1]
    wz = lo[2] + u * size[2]
    # continuous voxel index under the voxel-center convention
    cx = wx / spacing[0] - 0.5
    cy = wy / spacing[1] - 0.5
    cz = wz / spacing[2] - 0.5
    zz, yy, xx = np.meshgrid(cz, cy, cx, indexing="ij")
    vals = _trilinear(mask, np.stack([zz.ravel(), yy.ravel(), xx.ravel()]))
    return vals.reshape(grid, grid, grid)


def build_atlas(cases, grid: int = DEFAULT_GRID) -> ProbAtlas:
    """cases: iterable of (mask array (nz,ny,nx), BoundingBox, spacing)."""
    cases = list(cases)
    if not cases:
        raise ValidationError("no atlas cases")
    acc = np.zeros((grid, grid, grid), dtype=np.float64)
    for mask, box, spacing in cases:
        if not np.any(mask):
            raise ValidationError("atlas case has an empty mask")
        acc += _sample_mask_in_box(np.asarray(mask), spacing, box, grid)
    acc /= len(cases)
    return ProbAtlas(grid=np.clip(acc, 0.0, 1.0), n_cases=len(cases))


def expand_box(box: BoundingBox, margin_mm: float, header: VolumeHeader) -> BoundingBox:
    """Grow each face by margin_mm, clamped to the volume's world extent."""
    extent = np.asarray(header.dims, dtype=np.float64) * np.asarray(header.spacing)
    lo = np.maximum(box.lo - margin_mm, 0.0)
    hi = np.minimum(box.hi + margin_mm, extent)
    if np.any(hi <= lo):
        raise ValidationError("margin-expanded box is degenerate")
    return BoundingBox((lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]))


def project_atlas(
    atlas: ProbAtlas, box: BoundingBox, margin_mm: float, header: VolumeHeader
) -> ScalarVolume:
    """Probability volume on the target grid: trilinear atlas lookup inside
    the margin-expanded box, zero outside."""
    ebox = expand_box(box, margin_mm, header)
    nx, ny, nz = header.dims
    sx, sy, sz = header.spacing
    G = atlas.resolution

    out = np.zeros((nz, ny, nx), dtype=np.float64)
    # voxel index ranges whose centers fall inside the expanded box
    lo_idx = np.maximum(np.ceil(ebox.lo / header.spacing - 0.5).astype(int), 0)
    hi_idx = np.minimum(np.floor(ebox.hi / header.spacing - 0.5).astype(int), np.array(header.dims) - 1)
    if np.any(hi_idx < lo_idx):
        raise ValidationError("expanded box contains no voxel centers")

    xs = np.arange(lo_idx[0], hi_idx[0] + 1)
    ys = np.arange(lo_idx[1], hi_idx[1] + 1)
    zs = np.arange(lo_idx[2], hi_idx[2] + 1)
    # normalized box coordinate of each voxel center, then atlas index
    ux = ((xs + 0.5) * sx - ebox.lo[0]) / ebox.size[0]
    uy = ((ys + 0.5) * sy - ebox.lo[1]) / ebox.size[1]
    uz = ((zs + 0.5) * sz - ebox.lo[2]) / ebox.size[2]
    gx = ux * G - 0.5
    gy = uy * G - 0.5
    gz = uz * G - 0.5
    zz, yy, xx = np.meshgrid(gz, gy, gx, indexing="ij")
    # clamp at the atlas edge so a uniform atlas projects uniformly
    vals = _trilinear(atlas.grid, np.stack([zz.ravel(), yy.ravel(), xx.ravel()]), mode="nearest")
    out[np.ix_(zs, ys, xs)] = vals.reshape(len(zs), len(ys), len(xs))

    prob_header = VolumeHeader(dims=header.dims, channels=1, spacing=header.spacing, dtype="f32")
    return ScalarVolume(prob_header, np.clip(out, 0.0, 1.0).astype(np.float32))


def rough_segment(prob: ScalarVolume, threshold: float) -> np.ndarray:
    """Boolean mask of voxels with probability >= threshold."""
    return np.asarray(prob.data) >= threshold


def save_atlas(atlas: ProbAtlas, path, sidecar_path=None) -> None:
    G = atlas.resolution
    header = VolumeHeader(dims=(G, G, G), channels=1, spacing=(1.0, 1.0, 1.0), dtype="f32")
    from .volume import save_volume

    save_volume(ScalarVolume(header, atlas.grid.astype(np.float32)), path)
    sidecar = sidecar_path or f"{path}.meta"
    with open(sidecar, "w") as f:
        f.write(f"version 1\ncases {atlas.n_cases}\ngrid {G}\n")


def load_atlas(path, sidecar_path=None) -> ProbAtlas:
    from .volume import load_volume

    vol = load_volume(path)
    sidecar = sidecar_path or f"{path}.meta"
    meta = {}
    with open(sidecar) as f:
        for line in f:
            key, val = line.split()
            meta[key] = int(val)
    return ProbAtlas(grid=np.asarray(vol.data, dtype=np.float64), n_cases=meta["cases"])
