"""Domain types, material and geometry math, and acoustic pressure conversion.

All quantities are SI. Shapes are centred on their centroid; the ellipse and
rectangle put their long dimension on x, the pentagon has a vertex on +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

EPSILON_0 = 8.8541878128e-12  # F/m
SPL_REFERENCE_PA = 20e-6


class CapsenseError(Exception):
    """Base class for all errors raised by the package."""


class InvalidArgumentError(CapsenseError, ValueError):
    pass


class WrongGeometryError(CapsenseError, TypeError):
    pass


class NumericalError(CapsenseError, ArithmeticError):
    """A numerical procedure failed to converge.

    Attributes:
        diagnostics: free-form dictionary describing the failure.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TouchRegimeError(CapsenseError, ValueError):
    """The diaphragm reaches the landing surface; use the touch-mode models."""


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise InvalidArgumentError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Material:
    youngs_modulus: float  # Pa
    poisson_ratio: float
    density: float  # kg/m^3
    name: str = "custom"

    def __post_init__(self):
        _positive("youngs_modulus", self.youngs_modulus)
        _positive("density", self.density)
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise InvalidArgumentError(f"poisson_ratio must lie in [0, 0.5), got {self.poisson_ratio!r}")


# Engineering constants, not measured values for any particular foil.
MATERIALS = {
    "PI": Material(2.5e9, 0.34, 1420.0, name="PI"),
    "PET": Material(2.8e9, 0.38, 1380.0, name="PET"),
    "Al": Material(69e9, 0.33, 2700.0, name="Al"),
}
DEFAULT_MATERIAL = MATERIALS["PI"]


# ---------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Circle:
    radius: float

    def __post_init__(self):
        _positive("radius", self.radius)

    def area(self) -> float:
        return math.pi * self.radius**2

    def half_extents(self) -> tuple[float, float]:
        return self.radius, self.radius

    def contains(self, x, y):
        return np.hypot(x, y) < self.radius

    def ray_exit(self, x, y, ux, uy):
        return _ellipse_ray_exit(x, y, ux, uy, self.radius, self.radius)

    def boundary_radius(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.radius)

    def kink_angles(self) -> list[float]:
        return []

    def scaled(self, s: float) -> "Circle":
        return Circle(self.radius * s)


@dataclass(frozen=True)
class Ellipse:
    semi_major: float
    semi_minor: float

    def __post_init__(self):
        _positive("semi_major", self.semi_major)
        _positive("semi_minor", self.semi_minor)
        if self.semi_major < self.semi_minor:
            raise InvalidArgumentError("ellipse requires semi_major >= semi_minor")

    def area(self) -> float:
        return math.pi * self.semi_major * self.semi_minor

    def half_extents(self) -> tuple[float, float]:
        return self.semi_major, self.semi_minor

    def contains(self, x, y):
        return (x / self.semi_major) ** 2 + (y / self.semi_minor) ** 2 < 1.0

    def ray_exit(self, x, y, ux, uy):
        return _ellipse_ray_exit(x, y, ux, uy, self.semi_major, self.semi_minor)

    def boundary_radius(self, theta):
        a, b = self.semi_major, self.semi_minor
        c, s = np.cos(theta), np.sin(theta)
        return a * b / np.sqrt((b * c) ** 2 + (a * s) ** 2)

    def kink_angles(self) -> list[float]:
        return []

    def scaled(self, s: float) -> "Ellipse":
        return Ellipse(self.semi_major * s, self.semi_minor * s)


class _Polygon:
    """Mixin for convex polygons described by their vertex list."""

    def vertices(self) -> np.ndarray:
        raise NotImplementedError

    def _halfplanes(self):
        v = self.vertices()
        nxt = np.roll(v, -1, axis=0)
        edge = nxt - v
        normal = np.column_stack([edge[:, 1], -edge[:, 0]])
        normal /= np.linalg.norm(normal, axis=1)[:, None]
        # counter-clockwise vertices -> the normal above points outward
        offset = np.einsum("ij,ij->i", normal, v)
        return normal, offset

    def edge_distances(self, x, y):
        """Distance from (x, y) to every edge line, positive inside; shape (n_edges, ...)."""
        normal, offset = self._halfplanes()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return offset.reshape((-1,) + (1,) * x.ndim) - (
            normal[:, 0].reshape((-1,) + (1,) * x.ndim) * x + normal[:, 1].reshape((-1,) + (1,) * x.ndim) * y
        )

    def contains(self, x, y):
        return np.all(self.edge_distances(x, y) > 0, axis=0)

    def ray_exit(self, x, y, ux, uy):
        normal, offset = self._halfplanes()
        x, y, ux, uy = np.broadcast_arrays(*(np.asarray(q, dtype=float) for q in (x, y, ux, uy)))
        best = np.full(x.shape, np.inf)
        for (nx, ny), c in zip(normal, offset):
            rate = nx * ux + ny * uy
            slack = c - (nx * x + ny * y)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(rate > 1e-300, slack / rate, np.inf)
            best = np.minimum(best, t)
        return best

    def boundary_radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.ray_exit(np.zeros_like(theta), np.zeros_like(theta), np.cos(theta), np.sin(theta))

    def kink_angles(self) -> list[float]:
        v = self.vertices()
        return sorted(float(np.mod(np.arctan2(p[1], p[0]), 2 * np.pi)) for p in v)

    def half_extents(self) -> tuple[float, float]:
        v = self.vertices()
        return float(np.abs(v[:, 0]).max()), float(np.abs(v[:, 1]).max())


@dataclass(frozen=True)
class Square(_Polygon):
    side: float

    def __post_init__(self):
        _positive("side", self.side)

    def area(self) -> float:
        return self.side**2

    def vertices(self) -> np.ndarray:
        h = self.side / 2
        return np.array([[h, -h], [h, h], [-h, h], [-h, -h]])

    def scaled(self, s: float) -> "Square":
        return Square(self.side * s)


@dataclass(frozen=True)
class Rectangle(_Polygon):
    """Rectangle with ``a >= b``; arguments are swapped on construction if needed."""

    a: float
    b: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)
        if self.a < self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    def area(self) -> float:
        return self.a * self.b

    def vertices(self) -> np.ndarray:
        ha, hb = self.a / 2, self.b / 2
        return np.array([[ha, -hb], [ha, hb], [-ha, hb], [-ha, -hb]])

    def scaled(self, s: float) -> "Rectangle":
        return Rectangle(self.a * s, self.b * s)


@dataclass(frozen=True)
class Pentagon(_Polygon):
    """Regular pentagon of the given edge length, one vertex on the +y axis."""

    edge: float

    def __post_init__(self):
        _positive("edge", self.edge)

    @property
    def circumradius(self) -> float:
        return self.edge / (2 * math.sin(math.pi / 5))

    @property
    def inradius(self) -> float:
        return self.edge / (2 * math.tan(math.pi / 5))

    def area(self) -> float:
        return 0.25 * math.sqrt(5 * (5 + 2 * math.sqrt(5))) * self.edge**2

    def vertices(self) -> np.ndarray:
        ang = np.pi / 2 + 2 * np.pi * np.arange(5) / 5
        return self.circumradius * np.column_stack([np.cos(ang), np.sin(ang)])

    def scaled(self, s: float) -> "Pentagon":
        return Pentagon(self.edge * s)


@dataclass(frozen=True)
class Cantilever:
    length: float
    width: float

    def __post_init__(self):
        _positive("length", self.length)
        _positive("width", self.width)

    def area(self) -> float:
        return self.length * self.width

    def scaled(self, s: float) -> "Cantilever":
        return Cantilever(self.length * s, self.width * s)


PlateShape = Union[Circle, Ellipse, Square, Rectangle, Pentagon]
Shape = Union[Circle, Ellipse, Square, Rectangle, Pentagon, Cantilever]
PLATE_SHAPES = (Circle, Ellipse, Square, Rectangle, Pentagon)


def _ellipse_ray_exit(x, y, ux, uy, a, b):
    # smallest positive t with ((x + t ux)/a)^2 + ((y + t uy)/b)^2 = 1
    x, y, ux, uy = np.broadcast_arrays(*(np.asarray(q, dtype=float) for q in (x, y, ux, uy)))
    qa = (ux / a) ** 2 + (uy / b) ** 2
    qb = 2 * (x * ux / a**2 + y * uy / b**2)
    qc = (x / a) ** 2 + (y / b) ** 2 - 1.0
    disc = np.sqrt(np.maximum(qb * qb - 4 * qa * qc, 0.0))
    # numerically stable larger root
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(qb >= 0, 2 * (-qc) / (qb + disc), (-qb + disc) / (2 * qa))


@dataclass(frozen=True)
class DiaphragmGeometry:
    shape: Shape
    thickness: float

    def __post_init__(self):
        _positive("thickness", self.thickness)

    @property
    def is_plate(self) -> bool:
        return isinstance(self.shape, PLATE_SHAPES)


def surface_area(geometry: DiaphragmGeometry | Shape) -> float:
    """Lateral area of the diaphragm (thickness ignored)."""
    shape = geometry.shape if isinstance(geometry, DiaphragmGeometry) else geometry
    return shape.area()


# ---------------------------------------------------------------------------
# Stacks and loads


@dataclass(frozen=True)
class SecondCavity:
    hole_radius: float
    step_depth: float
    step_permittivity: float = 3.4

    def __post_init__(self):
        _positive("hole_radius", self.hole_radius)
        _positive("step_depth", self.step_depth)
        if self.step_permittivity < 1:
            raise InvalidArgumentError("step_permittivity must be >= 1")


@dataclass(frozen=True)
class SensorStack:
    gap: float
    insulator_layers: tuple[tuple[float, float], ...] = ()
    second_cavity: SecondCavity | None = None

    def __post_init__(self):
        _positive("gap", self.gap)
        object.__setattr__(self, "insulator_layers", tuple(tuple(map(float, lay)) for lay in self.insulator_layers))
        for t, eps in self.insulator_layers:
            _positive("layer thickness", t)
            if eps < 1:
                raise InvalidArgumentError(f"layer permittivity must be >= 1, got {eps!r}")

    def check_fits(self, shape: Shape) -> None:
        if self.second_cavity is None:
            return
        extent = min(shape.half_extents()) if hasattr(shape, "half_extents") else 0.0
        if not self.second_cavity.hole_radius < extent:
            raise InvalidArgumentError("second cavity hole_radius must be smaller than the diaphragm lateral extent")


@dataclass(frozen=True)
class StaticLoad:
    pressure: float

    def __post_init__(self):
        if not (self.pressure >= 0 and math.isfinite(self.pressure)):
            raise InvalidArgumentError(f"static pressure must be >= 0, got {self.pressure!r}")


@dataclass(frozen=True)
class HarmonicLoad:
    amplitude: float
    frequency: float  # Hz

    def __post_init__(self):
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise InvalidArgumentError(f"amplitude must be >= 0, got {self.amplitude!r}")
        _positive("frequency", self.frequency)

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency

    def pressure(self, t: float) -> float:
        return self.amplitude * math.sin(self.omega * t)


PressureLoad = Union[StaticLoad, HarmonicLoad]


# ---------------------------------------------------------------------------
# Operations


def flexural_rigidity(material: Material, h: float) -> float:
    """Plate bending stiffness E h^3 / (12 (1 - nu^2)) in N*m."""
    _positive("thickness", h)
    _positive("youngs_modulus", material.youngs_modulus)
    return material.youngs_modulus * h**3 / (12.0 * (1.0 - material.poisson_ratio**2))


def beam_rigidity(material: Material, width: float, h: float) -> float:
    """Beam bending stiffness E w h^3 / 12 in N*m^2."""
    _positive("width", width)
    _positive("thickness", h)
    return material.youngs_modulus * width * h**3 / 12.0


def spl_to_pressure(spl: float) -> float:
    """Sound pressure level in dB re 20 uPa to RMS pressure in Pa."""
    return SPL_REFERENCE_PA * 10.0 ** (spl / 20.0)


def pressure_to_spl(p: float) -> float:
    if not p > 0:
        raise InvalidArgumentError(f"pressure must be positive for an SPL, got {p!r}")
    return 20.0 * math.log10(p / SPL_REFERENCE_PA)


@dataclass(frozen=True)
class BisectResult:
    root: float
    iterations: int
    bracket: tuple[float, float] = field(default=(0.0, 0.0))


def bisect(f, lo: float, hi: float, rtol: float = 1e-10, max_iter: int = 200, atol: float = 0.0) -> BisectResult:
    """Plain bisection on a sign-changing bracket.

    Stops once the bracket width drops below ``max(atol, rtol * |mid|)``.
    Raises NumericalError when the bracket does not change sign or the
    iteration cap is reached.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return BisectResult(lo, 0, (lo, lo))
    if fhi == 0:
        return BisectResult(hi, 0, (hi, hi))
    if np.sign(flo) == np.sign(fhi):
        raise NumericalError("bisection bracket does not change sign", {"lo": lo, "hi": hi, "f_lo": flo, "f_hi": fhi})
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return BisectResult(mid, it, (mid, mid))
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= max(atol, rtol * abs(0.5 * (lo + hi))):
            return BisectResult(0.5 * (lo + hi), it, (lo, hi))
    raise NumericalError(
        "bisection did not converge",
        {"iterations": max_iter, "bracket": (lo, hi), "rtol": rtol},
    )
