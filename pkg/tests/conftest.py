"""Pytest configuration and fixtures."""
import os

import numpy as np
import pytest


# Pin the environment before any settings are read
os.environ["MKV_BISMUT_THREADS"] = "1"
os.environ["MKV_BISMUT_ENVIRONMENT"] = "test"
os.environ["MKV_BISMUT_SENTRY_DSN"] = ""
os.environ["MKV_BISMUT_LOG_LEVEL"] = "WARNING"


@pytest.fixture
def small_grid():
    """T=1, r0=0.5, dt=0.05: k=10 and 20 Euler steps."""
    from src.pathspace.grid import make_grid

    return make_grid(1.0, 0.05, 0.5)


@pytest.fixture
def fine_grid():
    """T=1, r0=0.5, dt=0.01."""
    from src.pathspace.grid import make_grid

    return make_grid(1.0, 0.01, 0.5)


@pytest.fixture
def dense_grid():
    """T=1, r0=0.5, dt=1/200: the grid of the full-size runs."""
    from src.pathspace.grid import make_grid

    return make_grid(1.0, 0.005, 0.5)


@pytest.fixture
def ou_model():
    """Ornstein-Uhlenbeck: a=1, no delay, no mean field, sigma=1."""
    from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model

    return linear_meanfield_delay_model(LinearDelayParams(a=1.0, b1=0.0, c=0.0, sigma0=1.0))


@pytest.fixture
def delay_model():
    """Delay plus mean field: a=0.5, b1=0.3, c=0.4, sigma=1."""
    from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model

    return linear_meanfield_delay_model(LinearDelayParams(a=0.5, b1=0.3, c=0.4, sigma0=1.0))


@pytest.fixture
def zero_start():
    from src.solver.particles import constant_sampler

    return constant_sampler(0.0, dim=1)


@pytest.fixture
def unit_shift():
    from src.bismut.functionals import constant_shift

    return constant_shift(1.0)


@pytest.fixture
def first_coordinate():
    from src.bismut.functionals import coordinate

    return coordinate(0)


@pytest.fixture
def flat_model():
    """d = m = 1 with b = 0 and sigma = 1: every derivative and pairing vanishes."""
    from src.models.coefficients import CoefficientSet

    return CoefficientSet(
        name="flat",
        d=1,
        m=1,
        drift=lambda t, segs, law: np.zeros((segs.shape[0], 1)),
        diffusion=lambda t, segs, law: np.ones((segs.shape[0], 1, 1)),
        drift_dir=lambda t, segs, dirs, law: np.zeros((segs.shape[0], 1)),
        diffusion_dir=lambda t, segs, dirs: np.zeros((segs.shape[0], 1, 1)),
        additive=True,
        sigma_state_only=True,
    )


@pytest.fixture
def experiment_dict():
    """Small additive-noise experiment that runs in well under a second."""
    return {
        "name": "ou_small",
        "model": {"name": "linear_delay", "params": {"a": 1.0, "b1": 0.0, "c": 0.0, "sigma0": 1.0}},
        "grid": {"T": 1.0, "dt": 0.05, "r0": 0.5},
        "N": 200,
        "seed": 7,
        "flavor": "additive_exact",
        "functional": {"name": "coordinate", "params": {"index": 0}},
        "direction": {"name": "constant_shift", "params": {"value": 1.0}},
        "initial": {"name": "constant", "params": {"value": 0.0}},
    }
