"""Euler-Bernoulli cantilever statics and harmonic response."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Cantilever,
    DiaphragmGeometry,
    HarmonicLoad,
    InvalidArgumentError,
    Material,
    NumericalError,
    WrongGeometryError,
    _positive,
    beam_rigidity,
    bisect,
)

RESONANCE_GUARD = 1e-9
# static tip deflection of a tip force F equals that of a uniform load q when F = 3 q L / 8
TIP_FORCE_FACTOR = 3.0 / 8.0


class ResonanceError(NumericalError):
    """Evaluation too close to a resonance of the undamped beam."""


@dataclass(frozen=True)
class CantileverSpec:
    length: float
    width: float
    thickness: float
    material: Material

    def __post_init__(self):
        _positive("length", self.length)
        _positive("width", self.width)
        _positive("thickness", self.thickness)

    @classmethod
    def from_geometry(cls, geometry: DiaphragmGeometry, material: Material) -> "CantileverSpec":
        if not isinstance(geometry.shape, Cantilever):
            raise WrongGeometryError("expected a cantilever geometry")
        return cls(geometry.shape.length, geometry.shape.width, geometry.thickness, material)

    @classmethod
    def with_area(cls, area: float, aspect_ratio: float, thickness: float, material: Material) -> "CantileverSpec":
        """Cantilever of plan area ``area`` and width/length ``aspect_ratio``."""
        _positive("area", area)
        _positive("aspect_ratio", aspect_ratio)
        length = math.sqrt(area / aspect_ratio)
        return cls(length, aspect_ratio * length, thickness, material)

    @property
    def aspect_ratio(self) -> float:
        return self.width / self.length

    @property
    def mass_per_length(self) -> float:
        return self.material.density * self.width * self.thickness

    @property
    def rigidity(self) -> float:
        return beam_rigidity(self.material, self.width, self.thickness)


def beta(spec: CantileverSpec, omega: float) -> float:
    """Wavenumber (m w^2 / D)^(1/4) in 1/m."""
    if not omega > 0:
        raise InvalidArgumentError(f"omega must be positive, got {omega!r}")
    return (spec.mass_per_length * omega**2 / spec.rigidity) ** 0.25


def characteristic(x: float) -> float:
    return 1.0 + math.cos(x) * math.cosh(x)


def characteristic_roots(n_modes: int) -> list[float]:
    """First roots of 1 + cos(x) cosh(x) = 0."""
    if n_modes < 1:
        raise InvalidArgumentError("n_modes must be >= 1")
    # cos(x) + sech(x) has the same roots and stays O(1); root k lies in ((k-1) pi, k pi)
    f = lambda x: math.cos(x) + 1.0 / math.cosh(x)  # noqa: E731
    roots = []
    for k in range(1, n_modes + 1):
        roots.append(bisect(f, (k - 1) * math.pi, k * math.pi, rtol=1e-15, max_iter=200).root)
    return roots


def mode_frequencies(spec: CantileverSpec, n_modes: int) -> list[float]:
    """Natural frequencies in Hz, ascending."""
    scale = math.sqrt(spec.rigidity / spec.mass_per_length) / (2 * math.pi)
    return [(x / spec.length) ** 2 * scale for x in characteristic_roots(n_modes)]


def _denominator(spec: CantileverSpec, omega: float) -> tuple[float, float]:
    b = beta(spec, omega)
    bL = b * spec.length
    guard = 1.0 + math.cos(bL) * math.cosh(bL)
    if abs(guard) <= RESONANCE_GUARD:
        roots = characteristic_roots(max(1, int(bL / math.pi) + 2))
        mode = 1 + int(np.argmin([abs(r - bL) for r in roots]))
        raise ResonanceError(
            f"drive frequency is within the resonance guard of mode {mode}",
            {"mode": mode, "beta_L": bL, "characteristic": guard},
        )
    return b, 2.0 * spec.rigidity * b**3 * guard


def equivalent_tip_force(spec: CantileverSpec, pressure: float) -> float:
    """Tip force whose static tip deflection matches a uniform ``pressure`` over the beam."""
    return TIP_FORCE_FACTOR * pressure * spec.width * spec.length


def shape_bracket(b: float, L: float, x):
    """The six-term bracket of the tip-driven harmonic deflection."""
    bx, bL = b * np.asarray(x, dtype=float), b * L
    return (
        np.sin(bx - bL)
        + np.sinh(bL - bx)
        - np.cos(bx) * np.sinh(bL)
        + np.sin(bL) * np.cosh(bx)
        + np.sin(bx) * np.cosh(bL)
        - np.cos(bL) * np.sinh(bx)
    )


def harmonic_response(spec: CantileverSpec, x, t: float, load: HarmonicLoad):
    """Deflection W(x, t) under the tone ``load``.

    The pressure amplitude acts through the equivalent tip force of
    :func:`equivalent_tip_force`, so the quasi-static limit reproduces the
    uniform-load tip deflection.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > spec.length):
        raise InvalidArgumentError("x must lie within [0, L]")
    b, denom = _denominator(spec, load.omega)
    force = equivalent_tip_force(spec, load.pressure(t))
    w = force / denom * shape_bracket(b, spec.length, x_arr)
    return float(w) if np.ndim(x) == 0 else w


def response_amplitude(spec: CantileverSpec, x: float, load: HarmonicLoad) -> float:
    """Peak |W(x)| over a cycle, i.e. the response with sin(wt) = 1."""
    b, denom = _denominator(spec, load.omega)
    force = equivalent_tip_force(spec, load.amplitude)
    return abs(force / denom * float(shape_bracket(b, spec.length, x)))


def bending_moment_clamped(spec: CantileverSpec, t: float, load: HarmonicLoad) -> float:
    """D * d2W/dx2 at the clamped edge, from the analytic second derivative."""
    b, denom = _denominator(spec, load.omega)
    force = equivalent_tip_force(spec, load.pressure(t))
    bL = b * spec.length
    second = 2.0 * b**2 * (math.sin(bL) + math.sinh(bL))
    return spec.rigidity * force / denom * second


def tip_deflection_static(spec: CantileverSpec, P: float) -> float:
    """Tip deflection q L^4 / (8 D) for uniform pressure P over the width."""
    if not P >= 0:
        raise InvalidArgumentError(f"pressure must be >= 0, got {P!r}")
    return P * spec.width * spec.length**4 / (8.0 * spec.rigidity)


def response_time_proxy(spec: CantileverSpec) -> float:
    """1 / f1; only meaningful for ranking designs against each other."""
    return 1.0 / mode_frequencies(spec, 1)[0]
