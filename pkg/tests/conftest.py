import numpy as np
import pytest
from hypothesis import settings

from tetherpoc.files import bundled_event_path, parse_event

settings.register_profile("repo", derandomize=True, deadline=None, max_examples=200)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def case1():
    return parse_event(bundled_event_path("case1"))


@pytest.fixture(scope="session")
def case2():
    return parse_event(bundled_event_path("case2"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record and print the verdict line of one acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"[AC-{number:02d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
