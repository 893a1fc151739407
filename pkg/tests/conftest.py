import numpy as np
import pytest

from mvip.plant import PlatformParams, with_payload


@pytest.fixture
def params():
    return PlatformParams(inertia=np.array([0.4, 0.4, 0.6]))


@pytest.fixture
def loaded(params):
    return with_payload(params, 5.0, [0.2, 0.16, 0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng):
    return PlatformParams(
        mass=rng.uniform(1.0, 60.0),
        inertia=rng.uniform(0.05, 5.0, 3),
        com_shift=rng.uniform(-0.06, 0.06, 3),
    )
