import pytest
from hypothesis import HealthCheck, settings

from nlsgraph.graph import standard_graph

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def interval():
    return standard_graph("interval", 1.0)


@pytest.fixture
def cycle():
    return standard_graph("cycle", 1.0)


@pytest.fixture
def star3():
    return standard_graph("star", 1.0, m=3)


@pytest.fixture
def dumbbell():
    return standard_graph("dumbbell", [1.0, 1.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
