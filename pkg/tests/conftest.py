import numpy as np
import pytest

from sphereflow.geometry import Domain, build_grid
from sphereflow.field import InitialData, generate
from sphereflow.flow import PenaltySchedule, SolverConfig, run_glhf, run_projected


@pytest.fixture(scope="session")
def disc16():
    return build_grid(Domain.unit_ball(2), 1 / 16)


@pytest.fixture(scope="session")
def disc32():
    return build_grid(Domain.unit_ball(2), 1 / 32)


@pytest.fixture(scope="session")
def ball3_32():
    return build_grid(Domain.unit_ball(3), 1 / 32)


@pytest.fixture(scope="session")
def hedgehog32(ball3_32):
    return generate(InitialData(kind="equator-hedgehog"), ball3_32, 2)


@pytest.fixture(scope="session")
def cap60_32(disc32):
    return generate(InitialData(kind="cap", latitude_deg=60.0), disc32, 2)


@pytest.fixture(scope="session")
def cap_run_32(disc32, cap60_32):
    """GLHF lam=1e3 cap run on the disc: the workhorse smooth trajectory."""
    cfg = SolverConfig(dt=SolverConfig.auto_dt(disc32), T=0.25, output_stride=8)
    return run_glhf(cap60_32, cfg, PenaltySchedule(lam=1e3))


@pytest.fixture(scope="session")
def onesided_run_32(disc32, cap60_32):
    """Projected cap run used by the hemisphere-confinement checks."""
    cfg = SolverConfig(dt=SolverConfig.auto_dt(disc32), T=0.5, output_stride=8)
    return run_projected(cap60_32, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
