"""Tile-wise inference and VOLF1 export of features and likelihoods.

The input volume is zero-padded to a tile-size multiple, processed as
non-overlapping tiles, and the half-resolution outputs are stitched in
index space and cropped to ceil(dim / 2) per axis.  Output headers carry
doubled spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError
from .model import N_CLASSES, N_FEATURES, build_model
from .volf import read_volf, write_volf


@dataclass(frozen=True)
class ExportConfig:
    input_path: str
    out_feat_path: str
    out_lik_path: str
    weights_path: str | None = None
    tile: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.tile < 8 or self.tile % 4 != 0:
            raise ConfigError(f"tile size must be >= 8 and divisible by 4, got {self.tile}")


def _normalize(x: np.ndarray) -> np.ndarray:
    std = float(x.std())
    return (x - float(x.mean())) / (std if std > 0 else 1.0)


def export_features(cfg: ExportConfig) -> None:
    vol = read_volf(cfg.input_path)
    if vol.channels != 1:
        raise ConfigError(f"input must be single-channel, got C={vol.channels}")
    nx, ny, nz = vol.dims
    data = _normalize(np.asarray(vol.data[0], dtype=np.float32))

    t = cfg.tile
    pz, py, px = (-nz % t, -ny % t, -nx % t)
    padded = np.pad(data, ((0, pz), (0, py), (0, px)))
    Pz, Py, Px = padded.shape

    model = build_model(cfg.weights_path, cfg.seed)
    h = t // 2
    feat = np.empty((N_FEATURES, Pz // 2, Py // 2, Px // 2), dtype=np.float32)
    lik = np.empty((N_CLASSES, Pz // 2, Py // 2, Px // 2), dtype=np.float32)
    with torch.no_grad():
        for iz in range(0, Pz, t):
            for iy in range(0, Py, t):
                for ix in range(0, Px, t):
                    tile = padded[iz : iz + t, iy : iy + t, ix : ix + t]
                    x = torch.from_numpy(tile)[None, None]
                    f, logits = model(x)
                    p = torch.softmax(logits, dim=1)
                    oz, oy, ox = iz // 2, iy // 2, ix // 2
                    feat[:, oz : oz + h, oy : oy + h, ox : ox + h] = f[0].numpy()
                    lik[:, oz : oz + h, oy : oy + h, ox : ox + h] = p[0].numpy()

    # crop the stitched half-resolution grid back to the unpadded extent
    cz, cy, cx = (nz + 1) // 2, (ny + 1) // 2, (nx + 1) // 2
    feat = feat[:, :cz, :cy, :cx]
    lik = lik[:, :cz, :cy, :cx]
    out_spacing = tuple(2.0 * s for s in vol.spacing)
    write_volf(cfg.out_feat_path, np.ascontiguousarray(feat), out_spacing)
    write_volf(cfg.out_lik_path, np.ascontiguousarray(lik), out_spacing)
