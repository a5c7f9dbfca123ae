import numpy as np
import pytest

from holoseq.geometry import OpticalConfig, build_lattice, paper_optical_config


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_config():
    """64x64 grid: unit-test scale where the dense oracle stays cheap."""
    return OpticalConfig(
        wavelength=820e-9, focal_length=4e-3, grid_x=64, grid_y=64, pixel_pitch=17e-6
    )


@pytest.fixture(scope="session")
def desk_config():
    """256x256 grid: the desk-scale profile used by the acceptance suite."""
    return paper_optical_config(grid=256)


@pytest.fixture(scope="session")
def grid_3x3():
    return build_lattice((3, 3), 5e-6, id_prefix="t")
