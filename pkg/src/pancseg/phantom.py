"""Deterministic synthetic CT phantoms: ellipsoid organs with known masks,
minimal bounding boxes, and synthetic multichannel feature volumes.

All randomness comes from numpy's PCG64 generator seeded from the config, so
a config fully determines every output bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .geometry import BoundingBox, box_from_mask
from .volume import FeatureVolume, ScalarVolume, VolumeHeader

BLUR_RADIUS = 4  # box-blur radius used by synth_feature_volume
BLUR_PASSES = 3


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_organs: int = 1
    organ_mean: tuple[float, ...] = (200.0,)
    organ_std: tuple[float, ...] = (10.0,)
    background_mean: float = 50.0
    background_std: float = 20.0
    center_jitter: float = 8.0  # voxels, uniform per axis around the volume center
    radius_range: tuple[float, float] = (10.0, 16.0)  # voxels
    seed: int = 0

    def __post_init__(self):
        if self.n_organs < 1:
            raise ConfigError("n_organs must be >= 1")
        if self.radius_range[0] <= 0 or self.radius_range[0] > self.radius_range[1]:
            raise ConfigError(f"bad radius_range {self.radius_range}")


def _ellipsoid_mask(dims, center, radii) -> np.ndarray:
    nx, ny, nz = dims
    z, y, x = np.ogrid[:nz, :ny, :nx]
    q = (
        ((x - center[0]) / radii[0]) ** 2
        + ((y - center[1]) / radii[1]) ** 2
        + ((z - center[2]) / radii[2]) ** 2
    )
    return q <= 1.0


def generate_phantom(cfg: PhantomConfig):
    """Returns (ct: ScalarVolume, masks: list of (nz,ny,nx) bool arrays,
    boxes: list of BoundingBox), all pure functions of cfg."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    nx, ny, nz = cfg.dims
    vol_center = np.array([nx, ny, nz], dtype=np.float64) / 2.0

    masks: list[np.ndarray] = []
    boxes: list[BoundingBox] = []
    ct = np.full((nz, ny, nx), cfg.background_mean, dtype=np.float64)
    if cfg.background_std > 0:
        ct += rng.normal(0.0, cfg.background_std, size=ct.shape)

    for k in range(cfg.n_organs):
        center = vol_center + rng.uniform(-cfg.center_jitter, cfg.center_jitter, size=3)
        radii = rng.uniform(cfg.radius_range[0], cfg.radius_range[1], size=3)
        lo = center - radii
        hi = center + radii
        if np.any(lo < 0.5) or np.any(hi > np.array(cfg.dims) - 0.5):
            raise ConfigError(
                f"organ {k} ellipsoid (center {center}, radii {radii}) leaves the volume"
            )
        mask = _ellipsoid_mask(cfg.dims, center, radii)
        mean = cfg.organ_mean[k % len(cfg.organ_mean)]
        std = cfg.organ_std[k % len(cfg.organ_std)]
        organ = np.full(ct.shape, mean)
        if std > 0:
            organ += rng.normal(0.0, std, size=ct.shape)
        ct[mask] = organ[mask]
        masks.append(mask)
        boxes.append(box_from_mask(mask, cfg.spacing))

    header = VolumeHeader(dims=cfg.dims, channels=1, spacing=cfg.spacing, dtype="f32")
    return ScalarVolume(header, ct.astype(np.float32)), masks, boxes


def _blur(x: np.ndarray, radius: int = BLUR_RADIUS) -> np.ndarray:
    out = x
    for _ in range(BLUR_PASSES):
        out = ndimage.uniform_filter(out, size=2 * radius + 1, mode="constant")
    return out


def synth_feature_volume(
    mask: np.ndarray,
    channels: int,
    seed: int,
    spacing=(1.0, 1.0, 1.0),
    noise_std: float = 0.5,
    blur_radius: int = BLUR_RADIUS,
) -> FeatureVolume:
    """Label-correlated smoothed random fields standing in for deep features.

    With channels == 8 the output is a likelihood volume: every voxel's
    channel values are positive, lie in [0, 1], and sum to 1; channel 0 is
    the organ channel, boosted inside (the blur of) the mask.
    """
    if channels < 1:
        raise ConfigError("channels must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    base = _blur(mask.astype(np.float64), blur_radius)
    nz, ny, nx = mask.shape

    fields = np.empty((channels, nz, ny, nx), dtype=np.float64)
    if channels == 8:
        for c in range(channels):
            noise = rng.normal(0.0, noise_std, size=mask.shape) if noise_std > 0 else 0.0
            score = 0.1 + np.abs(_blur(np.asarray(noise) * np.ones(mask.shape), blur_radius))
            if c == 0:
                score = score + 4.0 * base
            fields[c] = score
        fields /= fields.sum(axis=0, keepdims=True)
    else:
        for c in range(channels):
            amp = 1.0 if c == 0 else float(rng.uniform(0.5, 1.5))
            noise = rng.normal(0.0, noise_std, size=mask.shape) if noise_std > 0 else 0.0
            fields[c] = _blur(mask * amp + noise, blur_radius)

    header = VolumeHeader(
        dims=(nx, ny, nz), channels=channels, spacing=tuple(spacing), dtype="f32"
    )
    return FeatureVolume(header, fields.astype(np.float32))
