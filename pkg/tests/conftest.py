import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from maxreg.fem import build_interval_mesh, build_rect_mesh, mark_dirichlet

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def _setups():
    m1 = build_interval_mesh(12)
    m2 = build_interval_mesh(7, 2.0)
    m3 = build_rect_mesh(4, 4)
    m4 = build_rect_mesh(3, 5, 1.5, 1.0)
    return {
        "interval-dirichlet": (m1, mark_dirichlet(m1, lambda x: True)),
        "interval-neumann": (m2, mark_dirichlet(m2, lambda x: False)),
        "rect-mixed": (m3, mark_dirichlet(m3, lambda x: x[0] <= 0.0 or x[1] >= 1.0)),
        "rect-dirichlet": (m4, mark_dirichlet(m4, lambda x: True)),
    }


SETUPS = _setups()


@pytest.fixture(params=sorted(SETUPS))
def setup(request):
    return SETUPS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_interval():
    """1D, two cells on (0, 1), pure Dirichlet: a single free DOF at x = 1/2."""
    mesh = build_interval_mesh(2)
    return mesh, mark_dirichlet(mesh, lambda x: True)
