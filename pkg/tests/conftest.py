import numpy as np
import pytest

from fptconflict.conflict import ConflictQuery, PredictorInputs
from fptconflict.geometry import Disk, approximate_circle, visible_arc
from fptconflict.harness import scenario
from fptconflict.harness.runner import run_mc
from fptconflict.motion import LtiModel, PiecewiseLinearPlan, PlanStage, build_timeline

OPEN_START = (100.0, -20.0)
OPEN_VELOCITY = (-10.0, 1.0)
OPEN_Q = (2.2 ** 2, 1.58 ** 2)


@pytest.fixture(scope="session")
def open_model():
    return LtiModel.double_integrator(OPEN_Q)


@pytest.fixture(scope="session")
def open_plan():
    return PiecewiseLinearPlan((PlanStage(OPEN_START, OPEN_VELOCITY, 15.0),))


@pytest.fixture(scope="session")
def open_boundary():
    arc = visible_arc((0.0, 0.0), 5.0, OPEN_START)
    return approximate_circle((0.0, 0.0), 5.0, 6, arc, kind="circumscribed")


@pytest.fixture(scope="session")
def open_disk():
    return Disk((0.0, 0.0), 5.0)


@pytest.fixture(scope="session")
def open_timeline(open_model, open_plan):
    return build_timeline(open_model, open_plan, 15.0, 0.015)


@pytest.fixture(scope="session")
def open_query(open_model, open_plan, open_boundary):
    return ConflictQuery(open_plan, open_model, open_boundary, 15.0, 0.015)


@pytest.fixture(scope="session")
def open_inputs(open_query, open_timeline):
    return PredictorInputs.from_query(open_query, open_timeline)


@pytest.fixture(scope="session")
def closed_scenario():
    return scenario.load(scenario.bundled("closedloop"))


@pytest.fixture(scope="session")
def open_scenario():
    return scenario.load(scenario.bundled("openloop"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def open_mc(open_scenario):
    """Full-size Monte Carlo estimate for the open-loop scenario (shared across modules)."""
    return run_mc(open_scenario)


@pytest.fixture(scope="session")
def closed_mc(closed_scenario):
    return run_mc(closed_scenario)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
