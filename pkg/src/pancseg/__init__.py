"""pancseg: regression-forest bounding-box localization and probabilistic
atlas / graph-cut segmentation for 3D volumes."""

from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION

__version__ = "0.1.0"

__all__ = ["KERNEL_IMPLEMENTATION", "__version__"]
