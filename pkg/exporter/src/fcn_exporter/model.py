"""A compact 3D U-Net whose decoder stops at half the input resolution.

The pre-ultimate layer (immediately before the final 1x1x1 convolution) is
64 channels wide; the final layer maps it to 8 class logits.
"""

from __future__ import annotations

import torch
from torch import nn

N_FEATURES = 64
N_CLASSES = 8


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv3d(c_in, c_out, kernel_size=3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv3d(c_out, c_out, kernel_size=3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNet3dHalf(nn.Module):
    """Encoder to 1/4 resolution, decoder back up to 1/2 resolution."""

    def __init__(self):
        super().__init__()
        self.enc1 = _block(1, 16)  # full resolution
        self.pool1 = nn.MaxPool3d(2)
        self.enc2 = _block(16, 32)  # 1/2 resolution
        self.pool2 = nn.MaxPool3d(2)
        self.bottleneck = _block(32, 64)  # 1/4 resolution
        self.up = nn.ConvTranspose3d(64, 32, kernel_size=2, stride=2)
        self.dec = _block(64, N_FEATURES)  # 1/2 resolution, pre-ultimate layer
        self.head = nn.Conv3d(N_FEATURES, N_CLASSES, kernel_size=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (features (N,64,D/2,H/2,W/2), logits (N,8,D/2,H/2,W/2))."""
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool1(e1))
        b = self.bottleneck(self.pool2(e2))
        d = self.dec(torch.cat([self.up(b), e2], dim=1))
        return d, self.head(d)


def build_model(weights_path=None, seed: int = 0) -> UNet3dHalf:
    """Model with loaded weights, or a seeded random initialization."""
    torch.manual_seed(seed)
    model = UNet3dHalf()
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    return model
