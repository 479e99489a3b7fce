"""Static deflection of clamped diaphragms.

Small-deflection maxima for five shapes, the circular profile, the implicit
large-deflection centre deflection of a circular plate, and the inverse
problem of finding the pressure that produces a given centre deflection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .core import (
    Circle,
    DiaphragmGeometry,
    Ellipse,
    InvalidArgumentError,
    Material,
    Pentagon,
    Rectangle,
    Square,
    WrongGeometryError,
    bisect,
    flexural_rigidity,
)

LARGE_DEFLECTION_COEFF = 0.488
ROOT_RTOL = 1e-10
ROOT_MAX_ITER = 200


class FormulaMode(str, Enum):
    PAPER_EXACT = "paper_exact"
    CONSISTENT = "consistent"

    @classmethod
    def parse(cls, value: "FormulaMode | str") -> "FormulaMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


# Max-deflection coefficient c(b/a) of a clamped rectangle, W0 = c P b^4 / D with
# b the short side, from Richardson-extrapolated runs of
# ``capsense.oracle.calibrate_rectangle``. Below b/a ~ 0.4 the maximum sits near
# the short ends, slightly above the centreline strip value 1/384, and the
# coefficient is flat; ratios under 0.1 use the 0.1 value.
RECTANGLE_RATIOS = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
RECTANGLE_COEFFS = np.array(
    [
        0.0026111882,
        0.0026111869,
        0.0026131990,
        0.0026116347,
        0.0025329560,
        0.0023570090,
        0.0021073408,
        0.0018220875,
        0.0015338368,
        0.0012653200,
    ]
)


@dataclass(frozen=True)
class PlateConfig:
    geometry: DiaphragmGeometry
    material: Material
    built_in_stress: float = 0.0  # Pa, tensile

    def __post_init__(self):
        if not self.geometry.is_plate:
            raise WrongGeometryError(f"plate models need a clamped diaphragm, got {type(self.geometry.shape).__name__}")
        if not (self.built_in_stress >= 0 and math.isfinite(self.built_in_stress)):
            raise InvalidArgumentError("built_in_stress must be >= 0 (tensile); compressive pre-stress is not supported")

    @property
    def shape(self):
        return self.geometry.shape

    @property
    def thickness(self) -> float:
        return self.geometry.thickness

    @property
    def rigidity(self) -> float:
        return flexural_rigidity(self.material, self.geometry.thickness)


@dataclass(frozen=True)
class DeflectionField:
    """Deflection W(x, y) of a diaphragm, with its maximum ``w0``."""

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    w0: float

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def scaled(self, factor: float) -> "DeflectionField":
        ev = self.evaluator
        return DeflectionField(lambda x, y: factor * ev(x, y), factor * self.w0)


def _require_nonnegative_pressure(P: float) -> None:
    if not (P >= 0 and math.isfinite(P)):
        raise InvalidArgumentError(f"pressure must be >= 0, got {P!r}")


def rectangle_coefficient(ratio: float) -> float:
    """Interpolated clamped-rectangle coefficient for short/long side ``ratio``."""
    if not 0 <= ratio <= 1:
        raise InvalidArgumentError(f"aspect ratio b/a must lie in [0, 1], got {ratio!r}")
    return float(np.interp(ratio, RECTANGLE_RATIOS, RECTANGLE_COEFFS))


def max_deflection_small(config: PlateConfig, P: float, formula_mode: FormulaMode | str = FormulaMode.CONSISTENT) -> float:
    """Small-deflection centre deflection of a clamped diaphragm.

    ``paper_exact`` reproduces the tabulated ellipse and rectangle formulas
    verbatim, including their dimensional defects; ``consistent`` uses forms
    that reduce to the circle and square limits.
    """
    _require_nonnegative_pressure(P)
    mode = FormulaMode.parse(formula_mode)
    shape = config.shape
    D = config.rigidity
    if isinstance(shape, Circle):
        return P * shape.radius**4 / (64.0 * D)
    if isinstance(shape, Ellipse):
        a, b = shape.semi_major, shape.semi_minor
        if mode is FormulaMode.PAPER_EXACT:
            denom = 3.0 * (a**2 + b**2) + 2.0 * a**2 * b**2
        else:
            denom = 3.0 * a**4 + 2.0 * a**2 * b**2 + 3.0 * b**4
        return P / (8.0 * D) * a**4 * b**4 / denom
    if isinstance(shape, Square):
        return 0.00133 * P * shape.side**4 / D
    if isinstance(shape, Pentagon):
        return 0.0041 * P * shape.edge**4 / D
    if isinstance(shape, Rectangle):
        a, b = shape.a, shape.b
        if mode is FormulaMode.PAPER_EXACT:
            return 0.00133 * P * a**4 * b**4 / (D * (7.0 * (a**4 + b**4) + 4.0 * a**2 * b**2))
        return rectangle_coefficient(b / a) * P * b**4 / D
    raise WrongGeometryError(f"no deflection formula for {type(shape).__name__}")


def circular_profile(radius: float, w0: float) -> DeflectionField:
    """W(r) = W0 (1 - (r/R)^2)^2 inside the disk, zero outside."""

    def evaluate(x, y):
        u = (x * x + y * y) / radius**2
        return np.where(u < 1.0, w0 * (1.0 - u) ** 2, 0.0)

    return DeflectionField(evaluate, w0)


def deflection_profile_circular(config: PlateConfig, W0: float) -> DeflectionField:
    if not isinstance(config.shape, Circle):
        raise WrongGeometryError("the circular profile needs a circular diaphragm")
    if not (W0 >= 0):
        raise InvalidArgumentError(f"W0 must be >= 0, got {W0!r}")
    return circular_profile(config.shape.radius, W0)


def _circle_terms(config: PlateConfig) -> tuple[float, float, float]:
    if not isinstance(config.shape, Circle):
        raise WrongGeometryError("the large-deflection model is defined for circular diaphragms only")
    R = config.shape.radius
    D = config.rigidity
    h = config.thickness
    stress_term = config.built_in_stress * h * R**2 / (16.0 * D)
    return R, D, stress_term


def large_deflection_residual(config: PlateConfig, P: float, w: float) -> float:
    """w - P R^4 / (64 D (1 + 0.488 (w/h)^2 + sigma h R^2 / 16 D)); zero at the solution."""
    R, D, stress_term = _circle_terms(config)
    h = config.thickness
    linear = P * R**4 / (64.0 * D)
    return w - linear / (1.0 + LARGE_DEFLECTION_COEFF * (w / h) ** 2 + stress_term)


def max_deflection_large(config: PlateConfig, P: float) -> float:
    """Centre deflection of a clamped circular plate including the cubic stiffening
    and tensile built-in stress terms, solved by bisection."""
    _require_nonnegative_pressure(P)
    R, D, _ = _circle_terms(config)
    upper = P * R**4 / (64.0 * D)
    if upper == 0.0:
        return 0.0
    res = bisect(lambda w: large_deflection_residual(config, P, w), 0.0, upper, rtol=ROOT_RTOL, max_iter=ROOT_MAX_ITER)
    return res.root


def touch_point_pressure(config: PlateConfig, target_depth: float) -> float:
    """Pressure at which the large-deflection centre deflection reaches ``target_depth``."""
    if not (target_depth > 0 and math.isfinite(target_depth)):
        raise InvalidArgumentError(f"target_depth must be positive, got {target_depth!r}")
    R, D, _ = _circle_terms(config)
    lo = 0.0
    hi = 64.0 * D * target_depth / R**4  # the deflection-free guess is a lower bound
    while max_deflection_large(config, hi) < target_depth:
        lo, hi = hi, 2.0 * hi
    res = bisect(
        lambda p: max_deflection_large(config, p) - target_depth, lo, hi, rtol=ROOT_RTOL, max_iter=ROOT_MAX_ITER
    )
    return res.root
