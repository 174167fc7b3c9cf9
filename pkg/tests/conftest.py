import numpy as np
import pytest

from archetype.synth import SynthSpec, generate

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pure_cube():
    """Noiseless 20 x 500 cube with p = 3 and one pure pixel per endmember."""
    return generate(SynthSpec(bands=20, pixels=500, endmembers=3, pure_pixels=True, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
