import numpy as np
import pytest

from clfpde import pipeline
from clfpde.presets import preset_config
from clfpde.spectral import Coefficient, SLProblem, eigensolve, make_grid


@pytest.fixture(scope="session")
def grid():
    return make_grid(2049)


@pytest.fixture(scope="session")
def two_mode_bundle():
    """Designed and certified two-mode semilinear benchmark."""
    bundle = pipeline.design(preset_config("3.3"))
    pipeline.certify(bundle)
    return bundle


@pytest.fixture(scope="session")
def single_mode_bundle():
    """Designed and certified single-mode benchmark (L = 0)."""
    bundle = pipeline.design(preset_config("2.4"))
    pipeline.certify(bundle)
    return bundle


@pytest.fixture(scope="session")
def single_mode_bundle_L1():
    """Single-mode benchmark with an active kernel tail (L = 1)."""
    bundle = pipeline.design(preset_config("2.4", L=1.0))
    pipeline.certify(bundle)
    return bundle


@pytest.fixture(scope="session")
def varcoef_problem():
    return SLProblem(
        p=Coefficient.polynomial([1.0, 0.3, -0.2]),
        q=Coefficient.polynomial([-10.0, 5.0]),
        r=Coefficient.polynomial([1.0, 0.2]),
        b1=1.0, b2=0.0, a1=1.0, a2=0.0,
    )


@pytest.fixture(scope="session")
def varcoef_eigsys(varcoef_problem, grid):
    return eigensolve(varcoef_problem, grid, 32)


def random_modal_state(eigsys, j, rng, max_mode=40):
    n = min(eigsys.K, max_mode)
    amps = rng.standard_normal(n) / np.arange(1, n + 1) ** 2
    return amps @ eigsys.phis[:n], rng.standard_normal(j)
