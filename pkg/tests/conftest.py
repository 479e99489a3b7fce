import pytest
from hypothesis import settings

from capsense import DEFAULT_MATERIAL, Circle, DiaphragmGeometry, DielectricStack, PlateConfig
from capsense.touch import StepCavity, TouchSensorConfig

settings.register_profile("capsense", max_examples=60, deadline=None)
settings.load_profile("capsense")

PI_TAPE = DielectricStack(((25e-6, 3.4),))


def circle_plate(radius, thickness=25e-6, stress=0.0):
    return PlateConfig(DiaphragmGeometry(Circle(radius), thickness), DEFAULT_MATERIAL, stress)


@pytest.fixture
def single_touch_device():
    return TouchSensorConfig(circle_plate(0.012), 400e-6, PI_TAPE)


@pytest.fixture
def double_touch_device():
    step = StepCavity(2.5e-3, 26e-6, DielectricStack(((26e-6, 3.4),)))
    return TouchSensorConfig(circle_plate(0.013), 425e-6, PI_TAPE, step)


@pytest.fixture
def matched_single_device():
    return TouchSensorConfig(circle_plate(0.013), 425e-6, PI_TAPE)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
