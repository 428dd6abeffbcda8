import numpy as np
import pytest

from nanofiber.fiber_mode import FiberSpec, solve_he11
from nanofiber.light_atom import Physics
from nanofiber.trajectory_mc import CloudSpec, McConfig


@pytest.fixture(scope="session")
def fiber():
    return FiberSpec()


@pytest.fixture(scope="session")
def mode(fiber):
    return solve_he11(fiber)


@pytest.fixture(scope="session")
def physics(mode):
    return Physics(mode)


@pytest.fixture(scope="session")
def cloud():
    return CloudSpec()


@pytest.fixture
def small_cfg():
    return McConfig(n_trajectories=2000, batch_size=500)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines[number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
