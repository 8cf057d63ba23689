import numpy as np
import pytest

from svdpd.core import PhasePoint
from svdpd.dpd import DpdParams, DpdSystem, wrap_positions


def make_dpd_system(n, box, seed, a=25.0, gamma=4.5, sigma=3.0, kT=1.0):
    """Random positions and unit-variance momenta, without init_system's rescaling."""
    params = DpdParams(n_particles=n, box=box, a=a, gamma=gamma, sigma=sigma, kT_target=kT)
    rng = np.random.default_rng(seed)
    q = wrap_positions(rng.uniform(size=(n, 3)) * params.box_array, params.box_array)
    p = rng.normal(size=(n, 3))
    return DpdSystem(params, PhasePoint(q, p))


@pytest.fixture
def dpd_factory():
    return make_dpd_system
