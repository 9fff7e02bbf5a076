import numpy as np
import pytest

from nlss.groundstate import cached_ground_state

# lines collected by the acceptance suite and echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def gs128():
    return cached_ground_state(16.0, 128)


@pytest.fixture(scope="session")
def gs256():
    return cached_ground_state(16.0, 256)


@pytest.fixture(scope="session")
def gs512():
    return cached_ground_state(16.0, 512)


@pytest.fixture(scope="session")
def chi128(gs128):
    from nlss.linearized import scalar_chi0

    return scalar_chi0(gs128)[1]


@pytest.fixture(scope="session")
def chi256(gs256):
    from nlss.linearized import scalar_chi0

    return scalar_chi0(gs256)[1]


@pytest.fixture(scope="session")
def frame128(gs128, chi128):
    from nlss.modulation import ModulationFrame

    return ModulationFrame(gs128, 2, chi128)


@pytest.fixture(scope="session")
def frame256(gs256, chi256):
    from nlss.modulation import ModulationFrame

    return ModulationFrame(gs256, 2, chi256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
