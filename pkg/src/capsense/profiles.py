"""Deflection fields for every plate shape.

Circles use the closed-form profile. Other shapes use the finite-difference
oracle field by default (solved once at unit pressure and scaled, the problem
being linear), or an assumed product-form profile when asked for one.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import Circle, Ellipse, InvalidArgumentError, PlateShape
from .plates import (
    DeflectionField,
    FormulaMode,
    PlateConfig,
    circular_profile,
    max_deflection_large,
    max_deflection_small,
)

PROFILES = ("oracle", "product")
THEORIES = ("small", "large")


@lru_cache(maxsize=32)
def _unit_oracle(shape: PlateShape, rigidity: float, nodes: int):
    from .oracle import GridPlate, solve_plate

    return solve_plate(GridPlate.with_nodes(shape, nodes, rigidity, 1.0))


def product_profile(shape: PlateShape, w0: float) -> DeflectionField:
    """Assumed shape: squared distance-to-edge products, normalised to ``w0`` at the centroid."""
    if isinstance(shape, Circle):
        return circular_profile(shape.radius, w0)
    if isinstance(shape, Ellipse):
        a, b = shape.semi_major, shape.semi_minor

        def ellipse(x, y):
            u = 1.0 - (x / a) ** 2 - (y / b) ** 2
            return np.where(u > 0, w0 * u**2, 0.0)

        return DeflectionField(ellipse, w0)

    centre = shape.edge_distances(0.0, 0.0)

    def polygon(x, y):
        dist = shape.edge_distances(x, y)
        inside = np.all(dist > 0, axis=0)
        ratio = np.prod((dist / centre.reshape((-1,) + (1,) * np.ndim(x))) ** 2, axis=0)
        return np.where(inside, w0 * ratio, 0.0)

    return DeflectionField(polygon, w0)


def deflection_field(
    plate: PlateConfig,
    P: float,
    profile: str = "oracle",
    theory: str = "small",
    formula_mode: FormulaMode | str = FormulaMode.CONSISTENT,
    oracle_nodes: int = 129,
) -> DeflectionField:
    if profile not in PROFILES:
        raise InvalidArgumentError(f"profile must be one of {PROFILES}, got {profile!r}")
    if theory not in THEORIES:
        raise InvalidArgumentError(f"theory must be one of {THEORIES}, got {theory!r}")
    shape = plate.shape
    if isinstance(shape, Circle):
        w0 = max_deflection_large(plate, P) if theory == "large" else max_deflection_small(plate, P, formula_mode)
        return circular_profile(shape.radius, w0)
    if theory == "large":
        raise InvalidArgumentError("large-deflection fields exist for circular diaphragms only")
    if profile == "product":
        return product_profile(shape, max_deflection_small(plate, P, formula_mode))
    return _unit_oracle(shape, plate.rigidity, int(oracle_nodes)).as_field(scale=P)
