import numpy as np
import pytest

from respiradar.sim_core import MotionModel, RadarParams, SceneConfig, default_layout

# One line per acceptance criterion, filled in by test_acceptance.py and
# echoed in the terminal summary so the verdicts survive output capture.
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def short_params():
    """20 s of slow time; enough for a few dozen hops."""
    return RadarParams(duration=20.0)


@pytest.fixture(scope="session")
def layout():
    return default_layout(RadarParams().wavelength)


def breathing_scene(**kw) -> SceneConfig:
    base = dict(
        target_range=6.0, target_angle=80.0,
        respiration=MotionModel(kind="respiration", amplitude=2e-3, base_interval=1.25),
        noise_std=0.5, seed=3,
    )
    base.update(kw)
    return SceneConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
