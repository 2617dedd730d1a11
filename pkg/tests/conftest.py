import numpy as np
import pytest

from optliq import (ModelParams, ReducedParams, SolverConfig, converge, reduce)

# Table-style presets used across the suite
PRESET_PARAMS = {
    1: ModelParams(rho=0.05, lam=0.0, r=0.0, sigma=0.2, eta=7.5e-6),
    2: ModelParams(rho=0.0, lam=-0.1, r=0.0, sigma=0.2, eta=7.5e-6),
    3: ModelParams(rho=0.05, lam=0.03, r=0.01, sigma=0.2, eta=7.5e-6),
}


@pytest.fixture(scope="session")
def params1():
    return PRESET_PARAMS[1]


@pytest.fixture(scope="session")
def profile1():
    """Fully converged profile for parametrization 1 (default solver config)."""
    return converge(reduce(PRESET_PARAMS[1]))


@pytest.fixture(scope="session")
def profile2():
    return converge(reduce(PRESET_PARAMS[2]))


@pytest.fixture(scope="session")
def profile3():
    return converge(reduce(PRESET_PARAMS[3]))


@pytest.fixture(scope="session")
def quick_profile():
    """Cheap profile for functional (non-accuracy) tests."""
    cfg = SolverConfig(abs_tol=1e-3, N_start=20, L_start=1.5, L_step=0.25,
                       h_start=2e-5)
    return converge(ReducedParams(2.0, 0.5), cfg)


def second_divided_differences(x, u):
    slopes = np.diff(u) / np.diff(x)
    return np.diff(slopes) / (x[2:] - x[:-2])
