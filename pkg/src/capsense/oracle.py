"""Finite-difference reference solvers.

A clamped-plate biharmonic solver on masked uniform grids for the plate
shapes, and a 1-D clamped-free beam solver. Both are independent of the
closed-form models they are used to check.

Clamped edges are imposed through ghost values: every stencil point outside
the plate is replaced by the quadratic that vanishes with zero slope where the
stencil line crosses the true boundary and passes through the last interior
node on that line. Nodes closer than ``min_crossing`` steps to the boundary are
not solved for; they are represented by the same extrapolation. In the
grid-aligned case (square, rectangle) this reduces to the usual mirror rule.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from .cantilever import CantileverSpec
from .core import InvalidArgumentError, NumericalError, PlateShape, Rectangle, WrongGeometryError
from .plates import DeflectionField

# 13-point biharmonic stencil, scaled by spacing**4
_STENCIL = (
    [((0, 0), 20.0)]
    + [((dx, dy), -8.0) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    + [((dx, dy), 1.0) for dx, dy in ((2, 0), (-2, 0), (0, 2), (0, -2))]
    + [((dx, dy), 2.0) for dx, dy in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
)
_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))
RESIDUAL_TOL = 1e-8
MAX_REFINEMENTS = 10


@dataclass(frozen=True)
class GridPlate:
    shape: PlateShape
    spacing: float
    rigidity: float
    load: float
    min_crossing: float = 0.3

    def __post_init__(self):
        if not self.spacing > 0:
            raise InvalidArgumentError("grid spacing must be positive")
        if not self.rigidity > 0:
            raise InvalidArgumentError("rigidity must be positive")
        if not hasattr(self.shape, "ray_exit"):
            raise WrongGeometryError("the plate oracle needs a plate shape")

    @classmethod
    def with_nodes(cls, shape: PlateShape, n: int, rigidity: float, load: float) -> "GridPlate":
        """Grid with ``n`` nodes across the largest extent of the bounding box."""
        if n < 5:
            raise InvalidArgumentError("need at least 5 nodes across the plate")
        hx, hy = shape.half_extents()
        return cls(shape, 2 * max(hx, hy) / (n - 1), rigidity, load)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        hx, hy = self.shape.half_extents()
        mx = int(math.ceil(hx / self.spacing - 1e-9)) + 1
        my = int(math.ceil(hy / self.spacing - 1e-9)) + 1
        return np.arange(-mx, mx + 1) * self.spacing, np.arange(-my, my + 1) * self.spacing

    def crossings(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Node coordinates and, per direction, the boundary crossing distance in steps."""
        x, y = self.axes()
        X, Y = np.meshgrid(x, y, indexing="ij")
        inside = self.shape.contains(X, Y)
        theta = np.empty((len(_DIRECTIONS),) + X.shape)
        for k, (dx, dy) in enumerate(_DIRECTIONS):
            norm = math.hypot(dx, dy)
            dist = self.shape.ray_exit(X, Y, dx / norm, dy / norm)
            theta[k] = np.where(inside, dist / (norm * self.spacing), 0.0)
        return inside, theta, np.stack([X, Y])

    def mask(self) -> np.ndarray:
        inside, theta, _ = self.crossings()
        return inside & np.all(theta >= self.min_crossing, axis=0)


@dataclass
class FieldSolution:
    x: np.ndarray
    y: np.ndarray
    W: np.ndarray  # full grid, zero outside the solved mask
    mask: np.ndarray
    residual: float
    iterations: int
    residual_history: list[float] = field(default_factory=list)

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    def as_field(self, scale: float = 1.0) -> DeflectionField:
        """Bicubic spline through the grid values; the zero extension is C1 across a clamped edge."""
        spline = RectBivariateSpline(self.x, self.y, self.W, kx=3, ky=3)

        def evaluate(xq, yq):
            xq, yq = np.broadcast_arrays(xq, yq)
            return scale * spline.ev(xq, yq)

        return DeflectionField(evaluate, scale * float(self.W.max()))


def _assemble(grid: GridPlate):
    inside, theta, _ = grid.crossings()
    mask = inside & np.all(theta >= grid.min_crossing, axis=0)
    if not mask.any():
        raise InvalidArgumentError("grid too coarse: no interior nodes")
    nx, ny = mask.shape
    index = -np.ones(mask.shape, dtype=np.int64)
    ii, jj = np.nonzero(mask)
    index[ii, jj] = np.arange(ii.size)
    n = ii.size

    def at(arr, i, j):
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.full(i.shape, -1 if arr.dtype.kind == "i" else 0, dtype=arr.dtype)
        out[ok] = arr[i[ok], j[ok]]
        return out

    rows, cols, vals = [], [], []

    def add(r, c, v):
        keep = v != 0
        rows.append(r[keep])
        cols.append(c[keep])
        vals.append(v[keep])

    row = np.arange(n)
    for (dx, dy), coef in _STENCIL:
        if dx == dy == 0:
            add(row, row, np.full(n, coef))
            continue
        ti, tj = ii + dx, jj + dy
        tgt = at(index, ti, tj)
        direct = tgt >= 0
        add(row[direct], tgt[direct], np.full(direct.sum(), coef))
        ghost = ~direct
        if not ghost.any():
            continue
        # step direction and how many steps the stencil point lies along it
        steps = max(abs(dx), abs(dy))
        ux, uy = dx // steps, dy // steps
        k = _DIRECTIONS.index((ux, uy))
        gi, gj, grow = ii[ghost], jj[ghost], row[ghost]
        # last solved node r along the ray from p toward the stencil point
        r_i, r_j = gi.copy(), gj.copy()
        s = np.full(gi.shape, float(steps))
        if steps == 2:
            nxt = at(index, gi + ux, gj + uy) >= 0
            r_i[nxt] += ux
            r_j[nxt] += uy
            s[nxt] = 1.0
        th = theta[k][r_i, r_j]
        add(grow, index[r_i, r_j], coef * (s - th) ** 2 / th**2)

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    A.sum_duplicates()
    return A, mask, index


def solve_plate(grid: GridPlate) -> FieldSolution:
    """Solve D * biharmonic(W) = P with clamped edges."""
    x, y = grid.axes()
    A, mask, _ = _assemble(grid)
    n = A.shape[0]
    W = np.zeros(mask.shape)
    if grid.load == 0:
        return FieldSolution(x, y, W, mask, 0.0, 0, [0.0])
    b = np.full(n, grid.load * grid.spacing**4 / grid.rigidity)
    lu = spla.splu(A.tocsc())
    w = np.zeros(n)
    history = [1.0]
    # LU solve plus iterative refinement; fixed operation order keeps it deterministic
    for _ in range(MAX_REFINEMENTS):
        w = w + lu.solve(b - A @ w)
        history.append(float(np.linalg.norm(A @ w - b) / np.linalg.norm(b)))
        if history[-1] < RESIDUAL_TOL:
            break
    residual = history[-1]
    if not np.all(np.isfinite(w)) or residual > RESIDUAL_TOL:
        raise NumericalError("plate solve did not reach the residual tolerance", {"residual_history": history})
    W[mask] = w
    return FieldSolution(x, y, W, mask, residual, len(history) - 1, history)


def max_deflection(solution: FieldSolution) -> tuple[float, tuple[float, float]]:
    """Maximum deflection and its (x, y) location."""
    i, j = np.unravel_index(np.argmax(solution.W), solution.W.shape)
    return float(solution.W[i, j]), (float(solution.x[i]), float(solution.y[j]))


@dataclass(frozen=True)
class ConvergenceStudy:
    spacings: list[float]
    max_deflections: list[float]
    order: float
    extrapolated: float

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.spacings, self.max_deflections))


def richardson(spacings, values, order: float | None = None) -> tuple[float, float]:
    """Observed order from the last three values and the extrapolated limit.

    Extrapolation uses ``order`` when given, else the observed order.
    """
    h = np.asarray(spacings, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(h) < 3:
        raise InvalidArgumentError("need at least three spacings")
    ratio = h[-2] / h[-1]
    if not np.allclose(h[:-1] / h[1:], ratio, rtol=1e-6):
        raise InvalidArgumentError("spacings must form a geometric progression")
    d1, d2 = v[-3] - v[-2], v[-2] - v[-1]
    observed = math.log(abs(d1 / d2)) / math.log(ratio) if d2 != 0 and d1 != 0 else float("inf")
    p = observed if order is None else order
    extrapolated = v[-1] + (v[-1] - v[-2]) / (ratio**p - 1.0)
    return observed, float(extrapolated)


def convergence_study(shape: PlateShape, D: float, P: float, spacings) -> ConvergenceStudy:
    spacings = [float(h) for h in spacings]
    if len(spacings) < 3:
        raise InvalidArgumentError("a convergence study needs at least three spacings")
    values = [max_deflection(solve_plate(GridPlate(shape, h, D, P)))[0] for h in spacings]
    observed, extrapolated = richardson(spacings, values, order=2.0)
    return ConvergenceStudy(spacings, values, observed, extrapolated)


def calibrate_rectangle(ratios, nodes_short=(32, 64, 128)) -> dict[float, float]:
    """Richardson-extrapolated max-deflection coefficient W0 D / (P b^4) per b/a."""
    out = {}
    for ratio in ratios:
        shape = Rectangle(1.0 / ratio, 1.0)
        spacings = [1.0 / m for m in nodes_short]
        out[float(ratio)] = convergence_study(shape, 1.0, 1.0, spacings).extrapolated
    return out


def solve_beam(spec: CantileverSpec, q: float, n_nodes: int) -> float:
    """Tip deflection of a uniformly loaded clamped-free beam, D W'''' = q with q in N/m."""
    if n_nodes < 100:
        raise InvalidArgumentError("n_nodes must be at least 100")
    N = n_nodes - 1  # unknowns W_1..W_N; W_0 = 0 at the root
    h = spec.length / N

    def expand(j: int) -> list[tuple[int, float]]:
        # node j in terms of unknown columns (W_j -> column j - 1)
        if 1 <= j <= N:
            return [(j - 1, 1.0)]
        if j == 0:
            return []
        if j == -1:  # zero slope at the root
            return [(0, 1.0)]
        if j == N + 1:  # zero moment at the tip
            return [(N - 1, 2.0), (N - 2, -1.0)]
        # j == N + 2, zero shear at the tip
        return [(N - 1, 4.0), (N - 2, -4.0), (N - 3, 1.0)]

    rows, cols, vals = [], [], []
    for i in range(1, N + 1):
        for off, c in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
            for col, w in expand(i + off):
                rows.append(i - 1)
                cols.append(col)
                vals.append(c * w)
    K = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
    b = np.full(N, q * h**4 / spec.rigidity)
    return float(spla.spsolve(K, b)[-1])


def write_field_csv(solution: FieldSolution, path: str | Path) -> None:
    ii, jj = np.nonzero(solution.mask)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x_m", "y_m", "w_m"])
        for i, j in zip(ii, jj):
            writer.writerow([f"{solution.x[i]:.8e}", f"{solution.y[j]:.8e}", f"{solution.W[i, j]:.8e}"])


def field_summary(solution: FieldSolution) -> dict:
    w_max, loc = max_deflection(solution)
    return {
        "max_w_m": w_max,
        "location_m": list(loc),
        "residual": solution.residual,
        "iterations": solution.iterations,
        "spacing_m": solution.spacing,
        "nodes": int(solution.mask.sum()),
    }


def write_field_summary(solution: FieldSolution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(field_summary(solution), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def circle_reference(radius: float, rigidity: float, load: float) -> float:
    return load * radius**4 / (64.0 * rigidity)


