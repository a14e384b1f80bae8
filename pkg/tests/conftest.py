import numpy as np
import pytest

from pancseg.volume import ScalarVolume, VolumeHeader


def random_scalar_volume(rng, dims=(16, 16, 16), spacing=(1.0, 1.0, 1.0)):
    nx, ny, nz = dims
    data = rng.random((nz, ny, nx)).astype(np.float32) * 100.0
    header = VolumeHeader(dims=dims, channels=1, spacing=spacing, dtype="f32")
    return ScalarVolume(header, data)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
