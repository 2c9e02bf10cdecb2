# tests/conftest.py
import numpy as np
import pytest

from app.models.geometry_model import GridSpec, LatticeGeometry
from app.models.image_model import GreyLevels
from app.models.operator_model import SparseOperator
from app.models.solver_model import SolverConfig
from app.services.projection_service import build_lattice_operator


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running enumeration and benchmark runs")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_operator():
    """The 1 x 1 operator A = [1]."""
    return SparseOperator(matrix=np.array([[1.0]]))


@pytest.fixture
def lattice_hv_3():
    return build_lattice_operator(GridSpec(n=3), LatticeGeometry.from_code("hv"))


@pytest.fixture
def symmetric_levels():
    return GreyLevels.symmetric()


@pytest.fixture
def unit_levels():
    return GreyLevels(u0=0.0, u1=1.0)


@pytest.fixture
def solver_cfg():
    return SolverConfig(tol_kkt=1e-7, primal_dual_max_iters=20000, seed=7)
