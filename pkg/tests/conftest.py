import pytest

from hris.geometry import generate_layout
from hris.unitcell import LoadBank

F0 = 5.5e9


@pytest.fixture
def f0():
    return F0


@pytest.fixture
def bank():
    return LoadBank.default()


@pytest.fixture(scope="session")
def panel8():
    return generate_layout(8, 8, F0)


@pytest.fixture(scope="session")
def panel16():
    return generate_layout(16, 16, F0)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(label, passed, detail)``; lines are printed in the terminal summary."""
    return request.config.stash[_ACCEPTANCE_KEY].append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in lines:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
