"""Single- and double-touch capacitance of circular diaphragms.

Contact is modelled by truncating the free large-deflection profile at the
landing floor: W(r) = min(W_free(r), floor(r)). Touched area contributes a
parallel-plate term through the landing insulator; the untouched annuli are
integrated exactly for the clamped-circle profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacitance import CPCurve, CurvePoint, DielectricStack, Region, annulus_capacitance
from .core import EPSILON_0, Circle, InvalidArgumentError, SensorStack, WrongGeometryError
from .parallel import parallel_map
from .plates import PlateConfig, max_deflection_large, touch_point_pressure

DEFAULT_THRESHOLDS = (0.1, 0.9)


@dataclass(frozen=True)
class StepCavity:
    """Insulating step with a central hole: landing depth ``gap`` on the step, ``gap + step_depth`` in the hole."""

    hole_radius: float
    step_depth: float
    step_insulator: DielectricStack

    def __post_init__(self):
        if not self.hole_radius > 0:
            raise InvalidArgumentError("hole_radius must be positive")
        if not self.step_depth > 0:
            raise InvalidArgumentError("step_depth must be positive")
        if not self.step_insulator:
            raise InvalidArgumentError("the step needs a non-empty insulator stack")


@dataclass(frozen=True)
class TouchSensorConfig:
    plate: PlateConfig
    gap: float
    contact_insulator: DielectricStack
    second_cavity: StepCavity | None = None
    region_thresholds: tuple[float, float] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if not isinstance(self.plate.shape, Circle):
            raise WrongGeometryError("touch-mode models need a circular diaphragm")
        if not self.gap > 0:
            raise InvalidArgumentError("gap must be positive")
        if not self.contact_insulator:
            raise InvalidArgumentError("the landing surface needs an insulator; zero-thickness contact is rejected")
        lo, hi = self.region_thresholds
        if not 0 < lo < hi < 1:
            raise InvalidArgumentError("region thresholds must satisfy 0 < low < high < 1")
        if self.second_cavity is not None and not self.second_cavity.hole_radius < self.radius:
            raise InvalidArgumentError("hole_radius must be smaller than the diaphragm radius")

    @classmethod
    def from_stack(cls, plate: PlateConfig, stack: SensorStack, thresholds=DEFAULT_THRESHOLDS) -> "TouchSensorConfig":
        cavity = None
        if stack.second_cavity is not None:
            sc = stack.second_cavity
            cavity = StepCavity(sc.hole_radius, sc.step_depth, DielectricStack(((sc.step_depth, sc.step_permittivity),)))
        return cls(plate, stack.gap, DielectricStack(stack.insulator_layers), cavity, tuple(thresholds))

    @property
    def radius(self) -> float:
        return self.plate.shape.radius

    @property
    def is_double(self) -> bool:
        return self.second_cavity is not None

    def step_threshold_depth(self) -> float:
        """Free centre deflection at which the profile reaches the step at the hole edge."""
        rh = self.second_cavity.hole_radius
        return self.gap / (1.0 - (rh / self.radius) ** 2) ** 2


def contact_radius(W0_free: float, d: float, R: float) -> float:
    """Radius where the free profile W0 (1 - (r/R)^2)^2 crosses depth ``d``; 0 without contact."""
    if not W0_free >= 0:
        raise InvalidArgumentError(f"W0_free must be >= 0, got {W0_free!r}")
    if W0_free <= d:
        return 0.0
    return R * math.sqrt(1.0 - math.sqrt(d / W0_free))


def _effective_contact_radius(config: TouchSensorConfig, w0: float) -> float:
    R = config.radius
    if not config.is_double:
        return contact_radius(w0, config.gap, R)
    rh = config.second_cavity.hole_radius
    on_step = contact_radius(w0, config.gap, R)
    if on_step > rh:
        return on_step
    return min(contact_radius(w0, config.gap + config.second_cavity.step_depth, R), rh)


def _region(config: TouchSensorConfig, rc: float) -> Region:
    lo, hi = config.region_thresholds
    R = config.radius
    if rc == 0.0:
        return Region.NORMAL
    if rc < lo * R:
        return Region.TRANSITION
    if rc <= hi * R:
        return Region.LINEAR_TOUCH
    return Region.SATURATION


def classify_region(config: TouchSensorConfig, P: float) -> Region:
    if not P >= 0:
        raise InvalidArgumentError(f"pressure must be >= 0, got {P!r}")
    return _region(config, _effective_contact_radius(config, max_deflection_large(config.plate, P)))


def single_touch_capacitance(config: TouchSensorConfig, P: float) -> tuple[float, Region]:
    if config.is_double:
        raise InvalidArgumentError("configuration has a second cavity; use double_touch_capacitance")
    if not P >= 0:
        raise InvalidArgumentError(f"pressure must be >= 0, got {P!r}")
    R, d = config.radius, config.gap
    ins = config.contact_insulator.effective_thickness
    w0 = max_deflection_large(config.plate, P)
    rc = contact_radius(w0, d, R)
    c = EPSILON_0 * math.pi * rc**2 / ins + annulus_capacitance(R, d + ins, w0, rc, R)
    return c, _region(config, rc)


def double_touch_capacitance(config: TouchSensorConfig, P: float) -> tuple[float, Region]:
    if not config.is_double:
        raise InvalidArgumentError("configuration has no second cavity")
    if not P >= 0:
        raise InvalidArgumentError(f"pressure must be >= 0, got {P!r}")
    R, d = config.radius, config.gap
    cav = config.second_cavity
    rh = cav.hole_radius
    ins_hole = config.contact_insulator.effective_thickness
    ins_step = ins_hole + cav.step_insulator.effective_thickness
    w0 = max_deflection_large(config.plate, P)
    r_hole = min(contact_radius(w0, d + cav.step_depth, R), rh)
    r_step = max(contact_radius(w0, d, R), rh)
    c = (
        EPSILON_0 * math.pi * r_hole**2 / ins_hole
        + annulus_capacitance(R, d + cav.step_depth + ins_hole, w0, r_hole, rh)
        + EPSILON_0 * math.pi * (r_step**2 - rh**2) / ins_step
        + annulus_capacitance(R, d + ins_step, w0, r_step, R)
    )
    return c, _region(config, _effective_contact_radius(config, w0))


def touch_capacitance(config: TouchSensorConfig, P: float) -> tuple[float, Region]:
    if config.is_double:
        return double_touch_capacitance(config, P)
    return single_touch_capacitance(config, P)


def touch_pressures(config: TouchSensorConfig) -> dict[str, float]:
    """Touch-point pressures: ``tp`` for single touch, ``tp1``/``tp2`` for double touch."""
    if not config.is_double:
        return {"tp": touch_point_pressure(config.plate, config.gap)}
    return {
        "tp1": touch_point_pressure(config.plate, config.gap + config.second_cavity.step_depth),
        "tp2": touch_point_pressure(config.plate, config.step_threshold_depth()),
    }


def touch_curve_at(config: TouchSensorConfig, pressures) -> CPCurve:
    """C(P) with region labels at the given ascending pressures, plus touch-point metadata."""
    pressures = [float(p) for p in pressures]
    if any(p < 0 for p in pressures):
        raise InvalidArgumentError("pressures must be >= 0")
    results = parallel_map(lambda p: touch_capacitance(config, p), pressures)
    points = tuple(CurvePoint(p, c, r) for p, (c, r) in zip(pressures, results))
    meta = {
        "mode": "double" if config.is_double else "single",
        "radius_m": config.radius,
        "gap_m": config.gap,
        "region_thresholds": list(config.region_thresholds),
        **{k + "_pa": v for k, v in touch_pressures(config).items()},
    }
    return CPCurve(points, meta)


def touch_curve(config: TouchSensorConfig, p_max: float, n_points: int) -> CPCurve:
    """Uniformly sampled C(P) on [0, p_max]."""
    if not p_max > 0:
        raise InvalidArgumentError("p_max must be positive")
    if n_points < 2:
        raise InvalidArgumentError("n_points must be >= 2")
    return touch_curve_at(config, np.linspace(0.0, p_max, int(n_points)))
