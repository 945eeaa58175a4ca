import numpy as np
import pytest

from ulamconvex import catalog
from ulamconvex.truncation import truncate


@pytest.fixture(scope="session")
def ex1():
    return catalog.example1()


@pytest.fixture(scope="session")
def ex2():
    return catalog.example2()


@pytest.fixture(scope="session", params=["example1", "example2"])
def countable_map(request):
    return catalog.get(request.param).build()


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


def truncated(name, n):
    return truncate(catalog.get(name).build(), n).spec


# acceptance report ------------------------------------------------------------

ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
