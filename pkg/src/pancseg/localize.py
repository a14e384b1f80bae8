"""Bounding-box estimation: patch grids, offset targets, six per-face
regression forests, and per-patch averaging into the final box."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import features as feat
from . import forest as rf
from .errors import FormatError, LocalizationError, ValidationError
from .geometry import (  # noqa: F401  (re-exported public types)
    BoundingBox,
    box_from_faces,
    box_from_mask,
    center_stack,
    offset_from_box,
)
from .volume import FeatureVolume, IntegralVolume, ScalarVolume

FACES = ("x1", "x2", "y1", "y2", "z1", "z2")


@dataclass(frozen=True)
class PatchGrid:
    stride: int
    patch_size: int
    centers: np.ndarray  # (n, 3) int64 voxel indices (x, y, z)

    def __len__(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class BankParams:
    n_diff1: int = 40
    n_diff2: int = 40
    n_lbp: int = 20
    n_lik: int = 8
    patch_size: int = 25
    seed: int = 0


@dataclass
class LocalizerModel:
    bank: feat.FeatureBank
    forests: list[rf.RegressionForest]  # indexed x1, x2, y1, y2, z1, z2
    stride: int

    @property
    def patch_size(self) -> int:
        return self.bank.patch_size

    def __post_init__(self):
        if len(self.forests) != 6:
            raise ValidationError("a localizer needs exactly six forests")
        fp = self.bank.fingerprint()
        for f in self.forests:
            if f.bank_fingerprint != fp:
                raise ValidationError("forest bank fingerprint does not match the bank")


def place_patches(dims, spacing, p, stride) -> PatchGrid:
    """Lattice of patch centers whose p^3 extents stay inside the volume."""
    if p % 2 == 0:
        raise ValidationError(f"patch size must be odd, got {p}")
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    h = p // 2
    axes = [np.arange(h, n - h, stride, dtype=np.int64) for n in dims]
    if any(len(ax) == 0 for ax in axes):
        centers = np.empty((0, 3), dtype=np.int64)
    else:
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        centers = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    return PatchGrid(stride=stride, patch_size=p, centers=centers)


def grid_world_centers(grid: PatchGrid, spacing) -> np.ndarray:
    return (grid.centers.astype(np.float64) + 0.5) * np.asarray(spacing, dtype=np.float64)


def extract_targets(grid: PatchGrid, gt_box: BoundingBox, spacing) -> np.ndarray:
    """Per-patch offsets d = b - v-hat, shape (n, 6), world mm."""
    vw = grid_world_centers(grid, spacing)
    vhat = np.repeat(vw, 2, axis=1)
    return gt_box.as_array()[None, :] - vhat


def compute_case_features(
    ct: ScalarVolume, fvol: FeatureVolume, bank: feat.FeatureBank, stride: int
):
    """Feature matrix and world patch centers for one case."""
    if fvol.channels != bank.channels:
        raise ValidationError(
            f"feature volume has {fvol.channels} channels, bank expects {bank.channels}"
        )
    grid = place_patches(ct.dims, ct.spacing, bank.patch_size, stride)
    iv = IntegralVolume(ct)
    X = np.empty((len(grid), len(bank)), dtype=np.float64)
    for i, center in enumerate(grid.centers):
        patch = feat.Patch(tuple(int(c) for c in center), bank.patch_size)
        X[i] = feat.feature_vector(iv, fvol, bank, patch, ct.spacing)
    return X, grid_world_centers(grid, ct.spacing)


def train_localizer(
    cases, bank_params: BankParams, forest_cfg: rf.TrainConfig, stride: int = 8
) -> LocalizerModel:
    """cases: iterable of (ScalarVolume, FeatureVolume, BoundingBox)."""
    cases = list(cases)
    if not cases:
        raise ValidationError("no training cases")
    channels = {c[1].channels for c in cases}
    if len(channels) != 1:
        raise ValidationError(f"inconsistent feature channel counts: {sorted(channels)}")
    for _, _, box in cases:
        if np.any(box.size <= 0):
            raise ValidationError(f"degenerate ground-truth box {box.faces}")
    bank = feat.sample_bank(
        bank_params.seed,
        bank_params.n_diff1,
        bank_params.n_diff2,
        bank_params.n_lbp,
        bank_params.n_lik,
        bank_params.patch_size,
        channels.pop(),
    )
    per_case = [
        (compute_case_features(ct, fvol, bank, stride), box) for ct, fvol, box in cases
    ]
    feats_list = [(X, vw) for (X, vw), _ in per_case]
    boxes = [box for _, box in per_case]
    return train_localizer_precomputed(feats_list, boxes, bank, forest_cfg, stride)


def train_localizer_precomputed(
    feats_list, boxes, bank: feat.FeatureBank, forest_cfg: rf.TrainConfig, stride: int
) -> LocalizerModel:
    """Train from cached (feature matrix, world centers) pairs per case."""
    X = np.concatenate([X for X, _ in feats_list], axis=0)
    vhat = np.concatenate([np.repeat(vw, 2, axis=1) for _, vw in feats_list], axis=0)
    targets = (
        np.concatenate(
            [np.tile(b.as_array(), (len(X_c), 1)) for (X_c, _), b in zip(feats_list, boxes)]
        )
        - vhat
    )
    if len(X) == 0:
        raise LocalizationError("no patches in any training case")
    fp = bank.fingerprint()
    forests = [
        rf.train((X, targets[:, k]), replace(forest_cfg, seed=forest_cfg.seed + k), fp)
        for k in range(6)
    ]
    return LocalizerModel(bank=bank, forests=forests, stride=stride)


def estimate_box_from_features(model: LocalizerModel, X: np.ndarray, v_world: np.ndarray):
    if len(X) == 0:
        raise LocalizationError("empty patch grid: volume smaller than the patch size")
    vhat = np.repeat(v_world, 2, axis=1)
    per_patch = np.empty((len(X), 6), dtype=np.float64)
    for k in range(6):
        per_patch[:, k] = vhat[:, k] + model.forests[k].predict_many(X)
    return box_from_faces(per_patch.mean(axis=0)), per_patch


def estimate_box(model: LocalizerModel, ct: ScalarVolume, fvol: FeatureVolume):
    """Returns (estimated BoundingBox, per-patch (n, 6) face estimates)."""
    X, vw = compute_case_features(ct, fvol, model.bank, model.stride)
    return estimate_box_from_features(model, X, vw)


def face_distance(est: BoundingBox, gt: BoundingBox):
    """(mean mm over six faces, per-face absolute distances)."""
    per_face = np.abs(est.as_array() - gt.as_array())
    return float(per_face.mean()), per_face


_MAGIC = b"PSMB"
_VERSION = 1


def save_model(model: LocalizerModel, path) -> None:
    bank_bytes = feat.serialize_bank(model.bank).encode()
    meta = json.dumps({"stride": model.stride, "p": model.patch_size}).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(struct.pack("<I", len(bank_bytes)))
        f.write(bank_bytes)
        for forest in model.forests:
            blob = rf.forest_to_bytes(forest)
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)


def load_model(path) -> LocalizerModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise FormatError(f"{path}: not a localizer model bundle")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported bundle version {version}")
        (meta_len,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(meta_len))
        (bank_len,) = struct.unpack("<I", f.read(4))
        bank = feat.deserialize_bank(f.read(bank_len).decode())
        forests = []
        for _ in range(6):
            (blob_len,) = struct.unpack("<Q", f.read(8))
            forests.append(rf.forest_from_bytes(f.read(blob_len)))
    return LocalizerModel(bank=bank, forests=forests, stride=meta["stride"])
