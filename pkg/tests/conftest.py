import warnings

import pytest
from hypothesis import settings

from tqft73.angle_opt import maximize_volume, maximize_volume_report
from tqft73.complex_geometry import solve_gluing
from tqft73.triangulation import builtin_h_73, builtin_ideal_73

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

VOLUME = 4.592125697


@pytest.fixture(scope="session")
def ideal():
    return builtin_ideal_73()


@pytest.fixture(scope="session")
def htri():
    return builtin_h_73()


@pytest.fixture(scope="session")
def opt_report(ideal):
    return maximize_volume_report(ideal)


@pytest.fixture(scope="session")
def alpha0(opt_report):
    return opt_report.alpha


@pytest.fixture(scope="session")
def saddle(alpha0):
    return solve_gluing(alpha0)


@pytest.fixture(autouse=True)
def _quiet_numba():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=DeprecationWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
