import pytest

from ccot.config import PlannerConfig
from ccot.synthetic import lead_vehicle_scenario


@pytest.fixture
def cfg():
    return PlannerConfig()


@pytest.fixture
def lead_scene():
    return lead_vehicle_scenario("accelerate")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
