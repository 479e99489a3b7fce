"""Sensitivity, nonlinearity and linear-window detection on C(P) curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .capacitance import CPCurve
from .core import InvalidArgumentError

DEFAULT_R2_MIN = 0.999


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0:
            raise InvalidArgumentError(f"r_squared must lie in [0, 1], got {self.r_squared!r}")
        lo, hi = self.window
        if not lo < hi:
            raise InvalidArgumentError(f"fit window must satisfy p_lo < p_hi, got {self.window!r}")

    @property
    def span(self) -> float:
        return self.window[1] - self.window[0]

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    if syy == 0.0:
        return slope, intercept, 0.0
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / syy
    return slope, intercept, min(1.0, max(0.0, r2))


def linear_fit(points: Iterable[tuple[float, float]]) -> LinearFit:
    """Ordinary least squares. R^2 is 0 when y has no variance."""
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(np.unique(arr[:, 0])) < 2:
        raise InvalidArgumentError("linear_fit needs at least 2 distinct x values")
    x, y = arr[:, 0], arr[:, 1]
    slope, intercept, r2 = _ols(x, y)
    return LinearFit(slope, intercept, r2, (float(x.min()), float(x.max())))


def _windowed(curve: CPCurve, window: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = window
    if not lo < hi:
        raise InvalidArgumentError(f"window must satisfy p_lo < p_hi, got {window!r}")
    p, c = curve.pressures, curve.capacitances
    keep = (p >= lo) & (p <= hi)
    if keep.sum() < 2:
        raise InvalidArgumentError(f"fewer than 2 curve points inside window {window!r}")
    return p[keep], c[keep]


def sensitivity(curve: CPCurve, window: tuple[float, float]) -> float:
    """dC/dP as the OLS slope inside ``window`` (F/Pa)."""
    return linear_fit(zip(*_windowed(curve, window))).slope


def _hull_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Edge slopes of the upper and lower convex hulls of points sorted by x."""

    def chain(sign):
        hull = []
        for px, py in zip(x, sign * y):
            while len(hull) >= 2:
                (ax, ay), (bx, by) = hull[-2], hull[-1]
                if (bx - ax) * (py - ay) - (by - ay) * (px - ax) > 0:
                    break
                hull.pop()
            hull.append((px, py))
        h = np.array(hull)
        return sign * np.diff(h[:, 1]) / np.diff(h[:, 0])

    return np.concatenate([chain(1.0), chain(-1.0)])


def minimax_line(x, y) -> tuple[float, float, float]:
    """Best straight line in the max-norm: (slope, intercept, max |deviation|).

    The band width ptp(y - m x) is convex and piecewise linear in m with
    breakpoints at hull edge slopes, so the optimum is one of them.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if len(np.unique(x)) < 2:
        raise InvalidArgumentError("minimax_line needs at least 2 distinct x values")
    cand = _hull_slopes(x, y)
    cand = cand[np.isfinite(cand)]
    widths = np.array([np.ptp(y - m * x) for m in cand])
    m = float(cand[np.argmin(widths)])
    r = y - m * x
    return m, float(0.5 * (r.max() + r.min())), float(0.5 * np.ptp(r))


def nonlinearity(curve: CPCurve, window: tuple[float, float], method: str = "minimax") -> float:
    """Full-scale deviation max |C - line(C)| / (C_max - C_min) inside ``window``.

    ``minimax`` uses the best straight line (smallest worst-case deviation),
    ``ols`` the least-squares line.
    """
    p, c = _windowed(curve, window)
    span = float(c.max() - c.min())
    if span == 0.0:
        raise InvalidArgumentError("capacitance span is zero inside the window")
    if method == "minimax":
        return minimax_line(p, c)[2] / span
    if method == "ols":
        fit = linear_fit(zip(p, c))
        return float(np.max(np.abs(c - fit(p)))) / span
    raise InvalidArgumentError(f"method must be 'minimax' or 'ols', got {method!r}")


def _all_window_r2(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """R^2 of every contiguous window [i, j] from prefix sums; NaN where j - i < 2."""
    n = len(x)
    # centre and scale once so the prefix-sum moments stay well conditioned
    x = (x - x.mean()) / (np.ptp(x) or 1.0)
    y = (y - y.mean()) / (np.ptp(y) or 1.0)
    zero = np.zeros(1)
    Sx, Sy = np.concatenate([zero, np.cumsum(x)]), np.concatenate([zero, np.cumsum(y)])
    Sxx, Syy = np.concatenate([zero, np.cumsum(x * x)]), np.concatenate([zero, np.cumsum(y * y)])
    Sxy = np.concatenate([zero, np.cumsum(x * y)])
    i, j = np.triu_indices(n, k=2)
    m = (j - i + 1).astype(float)
    sx, sy = Sx[j + 1] - Sx[i], Sy[j + 1] - Sy[i]
    cxx = Sxx[j + 1] - Sxx[i] - sx * sx / m
    cyy = Syy[j + 1] - Syy[i] - sy * sy / m
    cxy = Sxy[j + 1] - Sxy[i] - sx * sy / m
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(cyy > 0, cxy * cxy / (cxx * cyy), 0.0)
    out = np.full((n, n), np.nan)
    out[i, j] = np.clip(r2, 0.0, 1.0)
    return out


def widest_linear_window(curve: CPCurve, r2_min: float = DEFAULT_R2_MIN) -> LinearFit | None:
    """Widest contiguous window (by pressure span) whose OLS fit reaches ``r2_min``.

    R^2 is not monotone under window growth, so every window is scored from
    prefix-sum moments instead of trusting a shrinking two-pointer. Ties go to
    the lower p_lo. Returns None when no window of 3+ points qualifies.
    """
    if not 0.0 < r2_min <= 1.0:
        raise InvalidArgumentError(f"r2_min must lie in (0, 1], got {r2_min!r}")
    if len(curve) < 3:
        raise InvalidArgumentError("widest_linear_window needs at least 3 points")
    p, c = curve.pressures, curve.capacitances
    r2 = _all_window_r2(p, c)
    ok = np.nan_to_num(r2, nan=-1.0) >= r2_min
    if not ok.any():
        return None
    i, j = np.nonzero(ok)
    spans = p[j] - p[i]
    best = np.flatnonzero(spans == spans.max())
    k = best[np.argmin(p[i[best]])]
    lo, hi = int(i[k]), int(j[k])
    return linear_fit(zip(p[lo : hi + 1], c[lo : hi + 1]))


def widest_linear_window_bruteforce(curve: CPCurve, r2_min: float = DEFAULT_R2_MIN) -> LinearFit | None:
    """Reference implementation: refit every window from scratch."""
    p, c = curve.pressures, curve.capacitances
    best = None
    for lo in range(len(p)):
        for hi in range(lo + 2, len(p)):
            fit = linear_fit(zip(p[lo : hi + 1], c[lo : hi + 1]))
            if fit.r_squared < r2_min:
                continue
            if best is None or fit.span > best.span or (fit.span == best.span and fit.window[0] < best.window[0]):
                best = fit
    return best


def read_curve_csv(path: str | Path) -> CPCurve:
    """Load measurement data with columns ``pressure_pa`` and ``capacitance_f``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"pressure_pa", "capacitance_f"} - set(reader.fieldnames or ())
        if missing:
            raise InvalidArgumentError(f"{path}: missing column(s) {sorted(missing)}")
        rows = [(float(r["pressure_pa"]), float(r["capacitance_f"])) for r in reader]
    rows.sort()
    p = [r[0] for r in rows]
    c = [r[1] for r in rows]
    return CPCurve.from_arrays(p, c, metadata={"source": str(path)})


def curve_summary(curve: CPCurve, r2_min: float = DEFAULT_R2_MIN) -> dict:
    full = (float(curve.pressures[0]), float(curve.pressures[-1]))
    window = widest_linear_window(curve, r2_min) if len(curve) >= 3 else None
    summary = {
        "sensitivity_f_per_pa": sensitivity(curve, full),
        "nonlinearity": nonlinearity(curve, full),
        "linear_window_pa": list(window.window) if window else None,
        "linear_window_r2": window.r_squared if window else None,
        "linear_window_sensitivity_f_per_pa": window.slope if window else None,
    }
    return summary


def aggregate(curves: Sequence[CPCurve], r2_min: float = DEFAULT_R2_MIN) -> list[dict]:
    from .parallel import parallel_map

    return parallel_map(lambda cv: curve_summary(cv, r2_min), curves)
