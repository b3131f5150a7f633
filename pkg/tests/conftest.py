import numpy as np
import pytest

from jellium.density import default_density_cutoff, make_band_limited_jellium, make_char_cube_power
from jellium.field import ModelParams
from jellium.groundstate import IonArrangement, make_ground_state
from jellium.lattice import build_mode_set

N = 2


@pytest.fixture(scope="session")
def params():
    return ModelParams(e=1.0, Z=1.0, M=10.0, N=N)


@pytest.fixture(scope="session")
def modes():
    return build_mode_set(N, 2)


@pytest.fixture(scope="session")
def designer():
    return make_band_limited_jellium(build_mode_set(N, default_density_cutoff(N)), 1.0, 1.0, seed=42)


@pytest.fixture(scope="session")
def sigma1():
    return make_char_cube_power(1, 1.0, 1.0)


@pytest.fixture(scope="session")
def ground(designer, params, modes):
    return make_ground_state(0.0, IonArrangement.periodic(N), designer, params, modes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
