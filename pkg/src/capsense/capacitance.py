"""Parallel-plate capacitance of deflected diaphragms.

Fringing is ignored. Deflection W is measured toward the fixed electrode, so
the local gap is ``d - W``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    EPSILON_0,
    Circle,
    DiaphragmGeometry,
    InvalidArgumentError,
    NumericalError,
    SensorStack,
    TouchRegimeError,
)
from .parallel import parallel_map
from .plates import DeflectionField, FormulaMode, PlateConfig, circular_profile, max_deflection_large, max_deflection_small

GAUSS_ORDER = 32
QUAD_RTOL = 1e-8
QUAD_MAX_DEPTH = 12
TOUCH_GUARD = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)


class QuadratureError(NumericalError):
    pass


class Region(str, Enum):
    NORMAL = "normal"
    TRANSITION = "transition"
    LINEAR_TOUCH = "linear_touch"
    SATURATION = "saturation"

    @property
    def rank(self) -> int:
        return list(Region).index(self)


@dataclass(frozen=True)
class DielectricStack:
    layers: tuple[tuple[float, float], ...]

    def __post_init__(self):
        layers = tuple((float(t), float(eps)) for t, eps in self.layers)
        object.__setattr__(self, "layers", layers)
        for t, eps in layers:
            if not t > 0:
                raise InvalidArgumentError(f"dielectric layer thickness must be positive, got {t!r}")
            if not eps >= 1:
                raise InvalidArgumentError(f"relative permittivity must be >= 1, got {eps!r}")

    @property
    def effective_thickness(self) -> float:
        """Electrical thickness sum(t_i / eps_i): the air gap with the same capacitance."""
        return sum(t / eps for t, eps in self.layers)

    @property
    def physical_thickness(self) -> float:
        return sum(t for t, _ in self.layers)

    def __bool__(self) -> bool:
        return bool(self.layers)


@dataclass(frozen=True)
class CurvePoint:
    pressure: float
    capacitance: float
    region: Region = Region.NORMAL


@dataclass(frozen=True)
class CPCurve:
    points: tuple[CurvePoint, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        p = self.pressures
        if len(p) > 1 and np.any(np.diff(p) <= 0):
            raise InvalidArgumentError("curve pressures must be strictly ascending")

    @property
    def pressures(self) -> np.ndarray:
        return np.array([pt.pressure for pt in self.points])

    @property
    def capacitances(self) -> np.ndarray:
        return np.array([pt.capacitance for pt in self.points])

    @property
    def regions(self) -> list[Region]:
        return [pt.region for pt in self.points]

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_arrays(cls, pressures, capacitances, regions=None, metadata=None) -> "CPCurve":
        regions = regions if regions is not None else [Region.NORMAL] * len(pressures)
        pts = tuple(CurvePoint(float(p), float(c), Region(r)) for p, c, r in zip(pressures, capacitances, regions))
        return cls(pts, dict(metadata or {}))


def base_capacitance(area: float, stack: DielectricStack) -> float:
    """eps0 A / sum(t_i / eps_i)."""
    if not area > 0:
        raise InvalidArgumentError(f"area must be positive, got {area!r}")
    if not stack:
        raise InvalidArgumentError("dielectric stack is empty")
    return EPSILON_0 * area / stack.effective_thickness


def deflected_capacitance_circular(R: float, d: float, W0: float, eps_r: float = 1.0) -> float:
    """Capacitance with the clamped-circle profile, C0 artanh(sqrt(k)) / sqrt(k), k = W0/d."""
    if not (R > 0 and d > 0):
        raise InvalidArgumentError("R and d must be positive")
    if not W0 >= 0:
        raise InvalidArgumentError(f"W0 must be >= 0, got {W0!r}")
    if W0 >= d:
        raise TouchRegimeError(f"centre deflection {W0:.6g} m reaches the gap {d:.6g} m; use the touch-mode models")
    c0 = EPSILON_0 * eps_r * math.pi * R**2 / d
    k = W0 / d
    if k == 0.0:
        return c0
    root = math.sqrt(k)
    return c0 * math.atanh(root) / root


def annulus_capacitance(R: float, gap: float, W0: float, r_lo: float, r_hi: float, eps_r: float = 1.0) -> float:
    """eps0 eps_r times the integral of 2 pi r / (gap - W(r)) over r_lo..r_hi for the circle profile.

    Uses the antiderivative in v = 1 - (r/R)^2: integral of dv / (gap - W0 v^2).
    """
    if r_hi <= r_lo:
        return 0.0
    area_factor = EPSILON_0 * eps_r * math.pi * R**2
    v_hi = 1.0 - (r_lo / R) ** 2
    v_lo = 1.0 - (r_hi / R) ** 2
    if W0 == 0.0:
        return area_factor * (v_hi - v_lo) / gap
    if W0 * v_hi**2 >= gap:
        raise TouchRegimeError("profile reaches the floor inside the annulus")
    rate = math.sqrt(W0 / gap)
    return area_factor / math.sqrt(gap * W0) * (math.atanh(rate * v_hi) - math.atanh(rate * v_lo))


def _panels(geometry: DiaphragmGeometry) -> list[tuple[float, float]]:
    cuts = geometry.shape.kink_angles()
    if not cuts:
        return [(0.0, math.pi), (math.pi, 2 * math.pi)]
    cuts = sorted(cuts)
    bounds = cuts + [cuts[0] + 2 * math.pi]
    return list(zip(bounds[:-1], bounds[1:]))


def deflected_capacitance_quadrature(
    field: DeflectionField,
    geometry: DiaphragmGeometry,
    d: float,
    eps_r: float = 1.0,
    rtol: float = QUAD_RTOL,
    max_depth: int = QUAD_MAX_DEPTH,
    rotation: float = 0.0,
) -> float:
    """Surface integral of eps / (d - W) over the diaphragm.

    Integrates the excess over the flat-plate value in polar coordinates
    fitted to the boundary, x = s rho(theta) (cos theta, sin theta), with
    32x32 Gauss-Legendre panels split at polygon vertices and bisected in both
    directions until each panel agrees with its four children. ``rotation``
    turns the diaphragm (and the sampling) about its centroid; the field is
    evaluated in the rotated frame.
    """
    if not d > 0:
        raise InvalidArgumentError("gap must be positive")
    if field.w0 >= (1.0 - TOUCH_GUARD) * d:
        raise TouchRegimeError(f"deflection {field.w0:.6g} m reaches the gap {d:.6g} m; use the touch-mode models")
    shape = geometry.shape
    eps = EPSILON_0 * eps_r
    area = shape.area()
    c0 = eps * area / d
    cr, sr = math.cos(rotation), math.sin(rotation)

    def panel(t0, t1, s0, s1):
        th = 0.5 * (t1 - t0) * _GL_NODES + 0.5 * (t1 + t0)
        s = 0.5 * (s1 - s0) * _GL_NODES + 0.5 * (s1 + s0)
        rho = shape.boundary_radius(th)
        S, TH = np.meshgrid(s, th, indexing="ij")
        RHO = np.broadcast_to(rho, S.shape)
        xs, ys = S * RHO * np.cos(TH), S * RHO * np.sin(TH)
        W = field(cr * xs - sr * ys, sr * xs + cr * ys)
        if np.any(W >= (1.0 - TOUCH_GUARD) * d):
            raise TouchRegimeError("deflection reaches the gap inside the diaphragm")
        excess = eps * W / (d * (d - W)) * S * RHO**2
        wts = np.outer(_GL_WEIGHTS, _GL_WEIGHTS)
        return float(np.sum(wts * excess)) * 0.25 * (t1 - t0) * (s1 - s0)

    worst = [0.0]

    def adapt(t0, t1, s0, s1, estimate, depth):
        tm, sm = 0.5 * (t0 + t1), 0.5 * (s0 + s1)
        kids = [(t0, tm, s0, sm), (tm, t1, s0, sm), (t0, tm, sm, s1), (tm, t1, sm, s1)]
        vals = [panel(*k) for k in kids]
        total = sum(vals)
        tol = rtol * c0 * (t1 - t0) / (2 * math.pi) * (s1 - s0)
        err = abs(total - estimate)
        if err <= tol:
            return total
        if depth >= max_depth:
            worst[0] += err
            return total
        return sum(adapt(*k, v, depth + 1) for k, v in zip(kids, vals))

    excess = 0.0
    for t0, t1 in _panels(geometry):
        excess += adapt(t0, t1, 0.0, 1.0, panel(t0, t1, 0.0, 1.0), 1)
    if worst[0] > rtol * c0:
        raise QuadratureError(
            "capacitance quadrature did not converge",
            {"estimate": c0 + excess, "error_bound": worst[0], "max_depth": max_depth},
        )
    return c0 + excess


def _field_for_pressure(plate: PlateConfig, P: float, profile: str, theory: str, formula_mode, oracle_nodes: int):
    from .profiles import deflection_field  # local import keeps oracle optional at module load

    return deflection_field(plate, P, profile=profile, theory=theory, formula_mode=formula_mode, oracle_nodes=oracle_nodes)


def capacitance_at(
    plate: PlateConfig,
    stack: SensorStack,
    P: float,
    profile: str = "oracle",
    theory: str = "small",
    formula_mode: FormulaMode | str = FormulaMode.CONSISTENT,
    oracle_nodes: int = 129,
) -> float:
    """Normal-mode capacitance at pressure ``P``; insulator layers add their electrical thickness."""
    insulator = DielectricStack(stack.insulator_layers).effective_thickness if stack.insulator_layers else 0.0
    gap = stack.gap + insulator
    shape = plate.shape
    if isinstance(shape, Circle):
        if theory == "large":
            w0 = max_deflection_large(plate, P)
        else:
            w0 = max_deflection_small(plate, P, formula_mode)
        if w0 >= stack.gap:
            raise TouchRegimeError(f"at {P:.6g} Pa the diaphragm touches (W0 = {w0:.6g} m, gap {stack.gap:.6g} m)")
        return deflected_capacitance_circular(shape.radius, gap, w0)
    fld = _field_for_pressure(plate, P, profile, theory, formula_mode, oracle_nodes)
    if fld.w0 >= stack.gap:
        raise TouchRegimeError(f"at {P:.6g} Pa the diaphragm touches (W0 = {fld.w0:.6g} m, gap {stack.gap:.6g} m)")
    return deflected_capacitance_quadrature(fld, plate.geometry, gap)


def capacitance_pressure_curve(
    plate: PlateConfig,
    stack: SensorStack,
    pressures: Sequence[float],
    profile: str = "oracle",
    theory: str = "small",
    formula_mode: FormulaMode | str = FormulaMode.CONSISTENT,
    oracle_nodes: int = 129,
) -> CPCurve:
    """Normal-mode C(P). Every point is computed independently."""
    pressures = [float(p) for p in pressures]
    if any(p < 0 for p in pressures):
        raise InvalidArgumentError("pressures must be >= 0")
    if any(b <= a for a, b in zip(pressures, pressures[1:])):
        raise InvalidArgumentError("pressures must be sorted strictly ascending")
    if not isinstance(plate.shape, Circle) and profile == "oracle":
        # warm the cached unit-pressure solve before fanning out
        _field_for_pressure(plate, 1.0, profile, theory, formula_mode, oracle_nodes)
    caps = parallel_map(
        lambda p: capacitance_at(plate, stack, p, profile, theory, formula_mode, oracle_nodes), pressures
    )
    meta = {
        "shape": type(plate.shape).__name__.lower(),
        "profile": "circular" if isinstance(plate.shape, Circle) else profile,
        "theory": theory,
        "gap_m": stack.gap,
        "c0_f": caps[0] if pressures and pressures[0] == 0 else None,
    }
    return CPCurve.from_arrays(pressures, caps, metadata=meta)
