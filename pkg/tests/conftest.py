import numpy as np
import pytest

from cglequil.bobnev import bobnev_state


@pytest.fixture(scope="session")
def vortex():
    """(state, params, profiles) for R = 1, n = 3, B0 = 100, P0 = 4500."""
    return bobnev_state(R=1.0, n=3, B0=100.0, P0=4500.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_poly(rng, vector, scale=0.5):
    """Random quadratic polynomial field on R^3 (scalar or vector valued)."""
    C = rng.normal(size=(3 if vector else 1, 10)) * scale

    def f(x):
        x_, y, z = x[..., 0], x[..., 1], x[..., 2]
        m = np.stack([np.ones_like(x_), x_, y, z, x_ * y, y * z, x_ * z, x_**2, y**2, z**2], -1)
        out = m @ C.T
        return out if vector else out[..., 0]

    return f
