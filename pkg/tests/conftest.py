import numpy as np
import pytest

from cfmgf.garch import GarchSpec
from cfmgf.sampling import RngStream


# Fixed datasets whose quadrature integrals are frozen in test_statistics.
X10 = np.array([[0.468178, -1.152208], [-1.705864, -0.590499], [-0.040236, 0.228693],
                [0.173635, 0.18794], [0.53719, 1.089597], [0.504862, 1.757499],
                [-0.183765, -1.496898], [-2.200867, 0.066532], [-0.717781, -0.298509],
                [0.16227, 0.331001]])
X8 = np.array([[-1.41074, 0.787424], [0.557808, -0.413273], [-0.556077, -0.181491],
               [-0.492391, -0.03262], [-1.172789, -1.647229], [0.830494, 0.705569],
               [0.238182, 0.212045], [-0.095249, 0.224023]])


@pytest.fixture
def x10():
    return X10.copy()


@pytest.fixture
def x8():
    return X8.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def warp_null():
    """1000 warp-speed replications under Gaussian innovations (shared, ~4 min)."""
    from cfmgf.experiments import warp_speed_garch

    return warp_speed_garch(GarchSpec.bivariate_reference(0.0), ["normal"], 300, [1.2],
                            [0.0, 0.05, 1.0], 1000, RngStream(31), keep_draws=True)


_ACCEPTANCE: list[str] = []


def record_acceptance(line: str):
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
