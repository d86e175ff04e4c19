import numpy as np
import pytest

from bvtomo.mesh import generate_disc_mesh


@pytest.fixture(scope="session")
def disc():
    return generate_disc_mesh(2.0, 0.27)


@pytest.fixture(scope="session")
def disc_delta():
    return generate_disc_mesh(2.0, 0.27, delta=0.2)


@pytest.fixture(scope="session")
def coarse():
    return generate_disc_mesh(2.0, 0.5, delta=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SQUARE_NODE = """4 2 0 0
0 0.0 0.0
1 1.0 0.0
2 1.0 1.0
3 0.0 1.0
"""
SQUARE_ELE = """2 3 0
0 0 1 2
1 0 2 3
"""


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_report(request):
    """Callable recording one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
