import numpy as np
import pytest

from redunplan.collision import default_scene
from redunplan.kinematics import TaskPose, default_model
from redunplan.planner import slide_samples
from redunplan.task import synthesize_path

# tool axis horizontal, pointing at the panel (+x)
DRILL_R = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
# hole column placed on slide sample j = 159 of the default +-2.1 m / 13.2 mm grid
COLUMN_Y = float(slide_samples(-2.1, 2.1, 0.0132)[159])


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def scene():
    return default_scene()


def vertical_path(z0, z1, n=10, duration=0.55):
    return synthesize_path(TaskPose([1.3, COLUMN_Y, z0], DRILL_R),
                           TaskPose([1.3, COLUMN_Y, z1], DRILL_R), n, duration)


def lateral_path(duration=0.55, n=10, length=2.0):
    return synthesize_path(TaskPose([1.3, COLUMN_Y, 1.0], DRILL_R),
                           TaskPose([1.3, COLUMN_Y + length, 1.0], DRILL_R), n, duration)


def random_q(model, rng, n=None):
    lo, hi = model.q_min, model.q_max
    shape = (7,) if n is None else (n, 7)
    return lo + (hi - lo) * rng.random(shape)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
