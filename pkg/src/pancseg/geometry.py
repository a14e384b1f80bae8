"""Axis-aligned bounding boxes and patch offsets, all in world millimeters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .volume import index_to_world


@dataclass(frozen=True)
class BoundingBox:
    """Six face coordinates (x1, x2, y1, y2, z1, z2) in world mm."""

    faces: tuple[float, float, float, float, float, float]

    def __post_init__(self):
        x1, x2, y1, y2, z1, z2 = self.faces
        if not (x1 <= x2 and y1 <= y2 and z1 <= z2):
            raise ValidationError(f"box faces must be ordered per axis, got {self.faces}")

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.faces[0], self.faces[2], self.faces[4]])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.faces[1], self.faces[3], self.faces[5]])

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    def as_array(self) -> np.ndarray:
        return np.asarray(self.faces, dtype=np.float64)


def box_from_faces(faces) -> BoundingBox:
    """Build a box, swapping crossed face pairs so the invariant holds."""
    f = np.asarray(faces, dtype=np.float64)
    out = f.copy()
    for a in range(3):
        out[2 * a] = min(f[2 * a], f[2 * a + 1])
        out[2 * a + 1] = max(f[2 * a], f[2 * a + 1])
    return BoundingBox(tuple(out))


def box_from_mask(mask: np.ndarray, spacing) -> BoundingBox:
    """Minimal box (voxel-center convention) containing the true voxels of a
    (nz, ny, nx) mask."""
    zs, ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise ValidationError("mask is empty")
    lo = index_to_world((xs.min(), ys.min(), zs.min()), spacing)
    hi = index_to_world((xs.max(), ys.max(), zs.max()), spacing)
    return BoundingBox((lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]))


def write_box_file(path, boxes) -> None:
    """box.txt: six mm values `x1 x2 y1 y2 z1 z2` per line, one line per organ."""
    with open(path, "w") as f:
        for box in boxes:
            f.write(" ".join(f"{v:.9g}" for v in box.faces) + "\n")


def read_box_file(path) -> list[BoundingBox]:
    boxes = []
    with open(path) as f:
        for line in f:
            vals = [float(v) for v in line.split()]
            if len(vals) != 6:
                raise ValidationError(f"{path}: expected six values per line")
            boxes.append(BoundingBox(tuple(vals)))
    return boxes


def center_stack(v_world) -> np.ndarray:
    """The 6-vector v-hat = (vx, vx, vy, vy, vz, vz) for a patch center in mm."""
    v = np.asarray(v_world, dtype=np.float64)
    return np.repeat(v, 2)


def offset_from_box(box: BoundingBox, v_world) -> np.ndarray:
    """Regression target d = b - v-hat."""
    return box.as_array() - center_stack(v_world)
