"""fcn_exporter: export 3D U-Net pre-ultimate-layer features (64 channels)
and 8-class likelihoods as VOLF1 volumes at halved resolution."""

__version__ = "0.1.0"
