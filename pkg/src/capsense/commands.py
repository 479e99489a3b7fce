"""Command implementations behind the ``capsense`` CLI.

Every command takes a validated :class:`SensorConfig` and returns a
:class:`CommandOutput` (report dict, main table, optional extra tables and a
plot description); writing files is left to :mod:`capsense.output`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cantilever import (
    CantileverSpec,
    mode_frequencies,
    response_amplitude,
    response_time_proxy,
    tip_deflection_static,
)
from .capacitance import CPCurve, DielectricStack, base_capacitance, capacitance_pressure_curve
from .config import FIELD_KINDS, ConfigError, SensorConfig, parse_quantity
from .core import (
    Circle,
    CapsenseError,
    HarmonicLoad,
    NumericalError,
    TouchRegimeError,
    pressure_to_spl,
    spl_to_pressure,
)
from .metrics import curve_summary, nonlinearity, sensitivity, widest_linear_window
from .oracle import GridPlate, convergence_study, field_summary, max_deflection, solve_beam, solve_plate
from .parallel import parallel_map
from .plates import FormulaMode, max_deflection_large, max_deflection_small
from .touch import TouchSensorConfig, touch_curve_at, touch_pressures


class InfeasibleError(CapsenseError):
    """No candidate design satisfies the search constraints."""


Table = tuple[list[str], list[list]]


@dataclass
class CommandOutput:
    name: str
    report: dict
    table: Table
    extra_tables: dict[str, Table] = field(default_factory=dict)
    plot: Callable | None = None


# ---------------------------------------------------------------------------
# deflect


def _oracle_max(cfg: SensorConfig, P: float) -> float:
    from .profiles import _unit_oracle

    plate = cfg.plate
    return max_deflection(_unit_oracle(plate.shape, plate.rigidity, cfg.oracle_nodes))[0] * P


def cmd_deflect(cfg: SensorConfig, oracle: bool = False) -> CommandOutput:
    pressures = cfg.pressures()
    if not cfg.geometry.is_plate:
        spec = CantileverSpec.from_geometry(cfg.geometry, cfg.material)
        header = ["pressure_pa", "tip_deflection_m"] + (["tip_deflection_oracle_m"] if oracle else [])
        rows = []
        for P in pressures:
            row = [P, tip_deflection_static(spec, P)]
            if oracle:
                row.append(solve_beam(spec, P * spec.width, 2001))
            rows.append(row)
        report = {"shape": "cantilever", "rigidity_nm2": spec.rigidity, "rows": len(rows)}
        if oracle and pressures[-1] > 0:
            report["oracle_relative_gap"] = abs(rows[-1][2] - rows[-1][1]) / rows[-1][1]
        return CommandOutput("deflect", report, (header, rows), plot=_xy_plot(header, rows, "Tip deflection"))

    plate = cfg.plate
    circle = isinstance(plate.shape, Circle)
    header = ["pressure_pa", "w0_paper_exact_m", "w0_consistent_m"]
    if circle:
        header.append("w0_large_m")
    if oracle:
        header.append("w0_oracle_m")
    rows = []
    for P in pressures:
        row = [P, max_deflection_small(plate, P, FormulaMode.PAPER_EXACT), max_deflection_small(plate, P, FormulaMode.CONSISTENT)]
        if circle:
            row.append(max_deflection_large(plate, P))
        if oracle:
            row.append(_oracle_max(cfg, P))
        rows.append(row)
    P = pressures[-1]
    selected = max_deflection_small(plate, P, cfg.formula_mode)
    report = {
        "shape": type(plate.shape).__name__.lower(),
        "area_m2": plate.shape.area(),
        "rigidity_nm": plate.rigidity,
        "formula_mode": cfg.formula_mode.value,
        "pressure_pa": P,
        "w0_m": selected,
        "w0_paper_exact_m": rows[-1][1],
        "w0_consistent_m": rows[-1][2],
    }
    if circle:
        report["w0_large_m"] = rows[-1][3]
    if oracle:
        w_or = rows[-1][-1]
        report["w0_oracle_m"] = w_or
        report["oracle_nodes"] = cfg.oracle_nodes
        report["oracle_relative_gap"] = abs(selected - w_or) / w_or if w_or else 0.0
    return CommandOutput("deflect", report, (header, rows), plot=_xy_plot(header, rows, "Maximum deflection"))


# ---------------------------------------------------------------------------
# capacitance curves


def _normal_curve(cfg: SensorConfig, pressures=None) -> CPCurve:
    return capacitance_pressure_curve(
        cfg.plate,
        cfg.require_stack(),
        cfg.pressures() if pressures is None else pressures,
        profile=cfg.profile,
        theory=cfg.theory,
        formula_mode=cfg.formula_mode,
        oracle_nodes=cfg.oracle_nodes,
    )


def _curve_metrics(curve: CPCurve, r2_min: float) -> dict:
    if len(curve) < 3 or np.ptp(curve.capacitances) == 0:
        return {}
    return curve_summary(curve, r2_min)


def _curve_rows(curve: CPCurve) -> list[list]:
    c0 = curve.capacitances[0]
    return [[pt.pressure, pt.capacitance, pt.capacitance - c0, pt.region.value] for pt in curve.points]


def cmd_cap_curve(cfg: SensorConfig, r2_min: float | None = None) -> CommandOutput:
    curve = _normal_curve(cfg)
    r2 = cfg.r2_min if r2_min is None else r2_min
    stack = cfg.require_stack()
    layers = DielectricStack(((stack.gap, 1.0),) + stack.insulator_layers)
    report = {
        **curve.metadata,
        "c0_f": base_capacitance(cfg.plate.shape.area(), layers),
        "r2_min": r2,
        **_curve_metrics(curve, r2),
    }
    header = ["pressure_pa", "capacitance_f", "delta_c_f", "region"]
    return CommandOutput("cap-curve", report, (header, _curve_rows(curve)), plot=_curve_plot(curve, {}))


def _touch_config(cfg: SensorConfig) -> TouchSensorConfig:
    stack = cfg.require_stack()
    if not stack.insulator_layers:
        raise ConfigError("touch mode needs at least one insulator layer on the landing surface", "stack.layers")
    try:
        return TouchSensorConfig.from_stack(cfg.plate, stack, cfg.region_thresholds)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "geometry") from None


def cmd_touch_curve(cfg: SensorConfig, r2_min: float | None = None) -> CommandOutput:
    tcfg = _touch_config(cfg)
    curve = touch_curve_at(tcfg, cfg.pressures())
    r2 = cfg.r2_min if r2_min is None else r2_min
    first_seen = {}
    for pt in curve.points:
        first_seen.setdefault(pt.region.value, pt.pressure)
    report = {**curve.metadata, "r2_min": r2, "region_onsets_pa": first_seen, **_curve_metrics(curve, r2)}
    header = ["pressure_pa", "capacitance_f", "delta_c_f", "region"]
    tps = {k: v for k, v in curve.metadata.items() if k.startswith("tp")}
    return CommandOutput("touch-curve", report, (header, _curve_rows(curve)), plot=_curve_plot(curve, tps))


# ---------------------------------------------------------------------------
# cantilever modes


def cmd_modes(cfg: SensorConfig) -> CommandOutput:
    if cfg.geometry.is_plate:
        raise ConfigError("modes needs a cantilever geometry", "geometry.shape")
    spec = CantileverSpec.from_geometry(cfg.geometry, cfg.material)
    n = int(cfg.doc.get("modes", 2))
    freqs = mode_frequencies(spec, n)
    sweep, amplitude = cfg.frequencies()
    rows = [[f, response_amplitude(spec, spec.length, HarmonicLoad(amplitude, f))] for f in sweep]
    amps = [r[1] for r in rows]
    k = int(np.argmax(amps))
    report = {
        "mode_frequencies_hz": freqs,
        "aspect_ratio": spec.aspect_ratio,
        "static_tip_deflection_m": tip_deflection_static(spec, amplitude),
        "response_time_proxy_s": response_time_proxy(spec),
        "drive_amplitude_pa": amplitude,
        "sweep_peak_hz": rows[k][0],
    }
    if n >= 2:
        report["f2_over_f1"] = freqs[1] / freqs[0]
    header = ["frequency_hz", "tip_amplitude_m"]

    def plot(ax):
        ax.loglog([r[0] for r in rows], amps, lw=1.2)
        for f in freqs:
            if sweep[0] <= f <= sweep[-1]:
                ax.axvline(f, ls="--", lw=0.8, color="tab:red")
        ax.set_xlabel("Frequency (Hz)")
        ax.set_ylabel("Tip amplitude (m)")

    modes_table = (["mode", "frequency_hz"], [[i + 1, f] for i, f in enumerate(freqs)])
    return CommandOutput("modes", report, (header, rows), {"frequencies": modes_table}, plot)


# ---------------------------------------------------------------------------
# SPL


def cmd_spl(value: float, direction: str) -> CommandOutput:
    if direction == "to_pa":
        out = spl_to_pressure(value)
        row = [value, out]
    elif direction == "to_db":
        out = pressure_to_spl(value)
        row = [out, value]
    else:
        raise ConfigError("direction must be to_pa or to_db", "spl.direction")
    report = {"direction": direction, "input": value, "output": out, "reference_pa": 20e-6}
    return CommandOutput("spl", report, (["spl_db", "pressure_pa"], [row]))


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(cfg: SensorConfig) -> CommandOutput:
    plate = cfg.plate
    nodes = list(cfg.doc.get("oracle", {}).get("nodes", [65, 129, 257]))
    ratios = {(b - 1) / (a - 1) for a, b in zip(nodes, nodes[1:])}
    if len(ratios) != 1 or ratios.pop() <= 1:
        raise ConfigError("node counts must refine geometrically, e.g. [65, 129, 257]", "oracle.nodes")
    P = cfg.reference_pressure
    if not P > 0:
        raise ConfigError("oracle runs need a positive pressure", "pressure")
    grids = [GridPlate.with_nodes(plate.shape, n, plate.rigidity, P) for n in nodes]
    study = convergence_study(plate.shape, plate.rigidity, P, [g.spacing for g in grids])
    analytic = max_deflection_small(plate, P, FormulaMode.CONSISTENT)
    finest = solve_plate(grids[-1])
    report = {
        "shape": type(plate.shape).__name__.lower(),
        "pressure_pa": P,
        "observed_order": study.order,
        "extrapolated_max_w_m": study.extrapolated,
        "analytic_max_w_m": analytic,
        "extrapolated_relative_gap": abs(study.extrapolated - analytic) / analytic,
        "finest": field_summary(finest),
    }
    rows = [[n, h, w, abs(w - analytic) / analytic] for n, (h, w) in zip(nodes, study.rows())]
    header = ["nodes", "spacing_m", "max_w_m", "relative_gap"]
    ii, jj = np.nonzero(finest.mask)
    field_rows = [[finest.x[i], finest.y[j], finest.W[i, j]] for i, j in zip(ii, jj)]

    def plot(ax):
        W = np.where(finest.mask, finest.W, np.nan)
        im = ax.pcolormesh(finest.x, finest.y, W.T, shading="auto")
        ax.set_aspect("equal")
        ax.figure.colorbar(im, ax=ax, label="W (m)")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")

    return CommandOutput("oracle", report, (header, rows), {"field": (["x_m", "y_m", "w_m"], field_rows)}, plot)


# ---------------------------------------------------------------------------
# sweep


def _axis_values(spec: dict, idx: int) -> list[float]:
    path = spec["path"]
    kind = FIELD_KINDS.get(path)
    if kind is None:
        raise ConfigError(f"not a numeric design field; choose from {sorted(FIELD_KINDS)}", f"sweep.parameters.{idx}.path")
    where = f"sweep.parameters.{idx}"
    if "values" in spec:
        return [parse_quantity(v, kind, f"{where}.values.{i}") for i, v in enumerate(spec["values"])]
    if not {"start", "stop", "steps"} <= set(spec):
        raise ConfigError("give either values or start/stop/steps", where)
    lo = parse_quantity(spec["start"], kind, f"{where}.start")
    hi = parse_quantity(spec["stop"], kind, f"{where}.stop")
    n = spec["steps"]
    if n == 1:
        return [lo]
    if spec.get("scale", "linear") == "log":
        if not (lo > 0 and hi > 0):
            raise ConfigError("log sweeps need positive bounds", where)
        return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def point_metrics(cfg: SensorConfig) -> dict[str, float]:
    """Scalar design metrics for one configuration; unavailable ones are NaN."""
    nan = float("nan")
    out: dict[str, float] = {}
    if not cfg.geometry.is_plate:
        spec = CantileverSpec.from_geometry(cfg.geometry, cfg.material)
        f = mode_frequencies(spec, 2)
        out["f1_hz"], out["f2_hz"] = f
        out["tip_deflection_m"] = tip_deflection_static(spec, cfg.reference_pressure)
        return out
    plate = cfg.plate
    P = cfg.reference_pressure
    out["w0_m"] = max_deflection_small(plate, P, cfg.formula_mode)
    if isinstance(plate.shape, Circle):
        out["w0_large_m"] = max_deflection_large(plate, P)
    if cfg.stack is None:
        return out
    layers = DielectricStack(((cfg.stack.gap, 1.0),) + cfg.stack.insulator_layers)
    out["c0_f"] = base_capacitance(plate.shape.area(), layers)
    try:
        curve = _normal_curve(cfg)
        span = (curve.pressures[0], curve.pressures[-1])
        out["sensitivity_f_per_pa"] = sensitivity(curve, span) if len(curve) >= 2 else nan
        out["nonlinearity"] = nonlinearity(curve, span) if np.ptp(curve.capacitances) > 0 else nan
    except TouchRegimeError:
        out["sensitivity_f_per_pa"] = nan
        out["nonlinearity"] = nan
    if isinstance(plate.shape, Circle) and cfg.stack.insulator_layers:
        for k, v in touch_pressures(_touch_config(cfg)).items():
            out[f"{k}_pa"] = v
    return out


def cmd_sweep(cfg: SensorConfig) -> CommandOutput:
    spec = cfg.doc.get("sweep")
    if spec is None:
        raise ConfigError("sweep command needs a sweep section", "sweep")
    params = spec["parameters"]
    axes = [_axis_values(p, i) for i, p in enumerate(params)]
    paths = [p["path"] for p in params]
    grid = list(itertools.product(*axes))

    def evaluate(values):
        point = cfg
        for path, v in zip(paths, values):
            point = point.with_value(path, v)
        return point_metrics(point)

    results = parallel_map(evaluate, grid)
    header = ["grid_index"] + paths + ["metric", "value"]
    rows = []
    for gi, (values, metrics) in enumerate(zip(grid, results)):
        for name, val in metrics.items():
            rows.append([gi, *values, name, val])
    report = {"parameters": paths, "grid_shape": [len(a) for a in axes], "points": len(grid), "rows": len(rows)}
    return CommandOutput("sweep", report, (header, rows))


# ---------------------------------------------------------------------------
# search


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class Evaluation:
    values: tuple[float, ...]
    score: float
    feasible: bool
    reason: str = ""
    objective: float = float("nan")


class _Search:
    def __init__(self, cfg: SensorConfig, r2_min: float):
        spec = cfg.doc.get("search")
        if spec is None:
            raise ConfigError("search command needs a search section", "search")
        self.cfg = cfg
        self.r2_min = r2_min
        self.objective = spec["objective"]
        self.dims = []
        for i, d in enumerate(spec["dimensions"]):
            kind = FIELD_KINDS.get(d["path"])
            if kind is None:
                raise ConfigError(f"not a numeric design field; choose from {sorted(FIELD_KINDS)}", f"search.dimensions.{i}.path")
            lo = parse_quantity(d["lo"], kind, f"search.dimensions.{i}.lo")
            hi = parse_quantity(d["hi"], kind, f"search.dimensions.{i}.hi")
            if not lo < hi:
                raise ConfigError("need lo < hi", f"search.dimensions.{i}")
            self.dims.append((d["path"], lo, hi, int(d.get("steps", 5))))
        self.constraints = []
        for i, c in enumerate(spec.get("constraints", [])):
            where = f"search.constraints.{i}"
            if c["type"] == "dimension_bounds":
                path = c.get("path")
                if path not in FIELD_KINDS:
                    raise ConfigError("dimension_bounds needs a numeric field path", f"{where}.path")
                lo = parse_quantity(c.get("lo", -math.inf), FIELD_KINDS[path], f"{where}.lo")
                hi = parse_quantity(c.get("hi", math.inf), FIELD_KINDS[path], f"{where}.hi")
                self.constraints.append(("dimension_bounds", path, lo, hi))
                continue
            if "p_lo" not in c or "p_hi" not in c:
                raise ConfigError("pressure constraints need p_lo and p_hi", where)
            lo = parse_quantity(c["p_lo"], "pressure", f"{where}.p_lo")
            hi = parse_quantity(c["p_hi"], "pressure", f"{where}.p_hi")
            if not 0 < lo < hi:
                raise ConfigError("constraint pressures must be positive and ordered", where)
            self.constraints.append((c["type"], None, lo, hi))
        self.refine_iterations = int(spec.get("refine_iterations", 20))

    def configure(self, values) -> SensorConfig:
        point = self.cfg
        for (path, *_), v in zip(self.dims, values):
            point = point.with_value(path, v)
        return point

    def _curve(self, point: SensorConfig) -> CPCurve:
        if isinstance(point.geometry.shape, Circle) and point.stack is not None and point.stack.insulator_layers:
            return touch_curve_at(_touch_config(point), point.pressures())
        return _normal_curve(point)

    def evaluate(self, values) -> Evaluation:
        values = tuple(float(v) for v in values)
        try:
            point = self.configure(values)
            curve = self._curve(point)
            span = (curve.pressures[0], curve.pressures[-1])
            if self.objective == "max_sensitivity":
                objective = sensitivity(curve, span)
                score = objective
            else:
                objective = nonlinearity(curve, span)
                score = -objective
            for kind, path, lo, hi in self.constraints:
                if kind == "dimension_bounds":
                    from .config import get_path

                    v = parse_quantity(get_path(point.doc, path), FIELD_KINDS[path], path)
                    if not lo <= v <= hi:
                        return Evaluation(values, -math.inf, False, f"{path} outside [{lo:g}, {hi:g}]", objective)
                elif kind == "linear_window_covers":
                    win = widest_linear_window(curve, self.r2_min) if len(curve) >= 3 else None
                    if win is None or not (win.window[0] <= lo and win.window[1] >= hi):
                        got = "none" if win is None else f"[{win.window[0]:g}, {win.window[1]:g}]"
                        return Evaluation(values, -math.inf, False, f"linear window {got} does not cover [{lo:g}, {hi:g}]", objective)
                elif kind == "touch_point_outside":
                    if not isinstance(point.geometry.shape, Circle) or not (point.stack and point.stack.insulator_layers):
                        return Evaluation(values, -math.inf, False, "touch points need a circular touch-mode sensor", objective)
                    inside = [k for k, tp in touch_pressures(_touch_config(point)).items() if lo < tp < hi]
                    if inside:
                        return Evaluation(values, -math.inf, False, f"{','.join(inside)} inside ({lo:g}, {hi:g})", objective)
            if not math.isfinite(score):
                return Evaluation(values, -math.inf, False, "objective not finite", objective)
            return Evaluation(values, score, True, "", objective)
        except (ConfigError, TouchRegimeError, NumericalError, ValueError, TypeError) as exc:
            return Evaluation(values, -math.inf, False, f"{type(exc).__name__}: {exc}")

    @staticmethod
    def better(a: Evaluation, b: Evaluation | None) -> bool:
        """True if ``a`` beats ``b``; equal scores prefer the smaller geometry."""
        if b is None:
            return a.feasible
        if not a.feasible:
            return False
        if not b.feasible or a.score > b.score:
            return True
        return a.score == b.score and a.values < b.values

    def golden(self, best: Evaluation, k: int, lo: float, hi: float, audit: list) -> Evaluation:
        def probe(x):
            vals = list(best.values)
            vals[k] = x
            ev = self.evaluate(vals)
            audit.append(("refine", ev))
            return ev

        a, b = lo, hi
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = probe(c), probe(d)
        for _ in range(self.refine_iterations):
            if fc.score >= fd.score:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = probe(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = probe(d)
        for cand in (fc, fd):
            if self.better(cand, best) and cand.score > best.score:
                best = cand
        return best

    def run(self) -> tuple[Evaluation, list]:
        axes = [np.linspace(lo, hi, n).tolist() for _, lo, hi, n in self.dims]
        grid = list(itertools.product(*axes))
        evals = parallel_map(self.evaluate, grid)
        audit = [("grid", ev) for ev in evals]
        best = None
        for ev in evals:
            if self.better(ev, best):
                best = ev
        if best is None:
            reasons = sorted({ev.reason for ev in evals})
            raise InfeasibleError("no grid point satisfies the constraints: " + "; ".join(reasons[:5]))
        for k, (_, lo, hi, n) in enumerate(self.dims):
            step = (hi - lo) / (n - 1)
            x = best.values[k]
            best = self.golden(best, k, max(lo, x - step), min(hi, x + step), audit)
        # re-evaluation gate: the emitted design must pass every constraint from scratch
        ranked = sorted([best] + [ev for ev in evals if ev.feasible], key=lambda e: (-e.score, e.values))
        for cand in ranked:
            check = self.evaluate(cand.values)
            audit.append(("recheck", check))
            if check.feasible:
                return check, audit
        raise InfeasibleError("no candidate survived re-evaluation")


def cmd_search(cfg: SensorConfig, r2_min: float | None = None) -> CommandOutput:
    search = _Search(cfg, cfg.r2_min if r2_min is None else r2_min)
    best, audit = search.run()
    paths = [d[0] for d in search.dims]
    header = ["step", "stage"] + paths + ["objective", "feasible", "reason"]
    rows = [[i, stage, *ev.values, ev.objective, int(ev.feasible), ev.reason] for i, (stage, ev) in enumerate(audit)]
    report = {
        "objective": search.objective,
        "best": dict(zip(paths, best.values)),
        "best_objective": best.objective,
        "evaluations": len(audit),
        "grid_points": sum(1 for s, _ in audit if s == "grid"),
        "feasible_grid_points": sum(1 for s, ev in audit if s == "grid" and ev.feasible),
        "config": search.configure(best.values).doc,
    }
    return CommandOutput("search", report, (header, rows))


# ---------------------------------------------------------------------------
# plots


def _xy_plot(header, rows, ylabel):
    def plot(ax):
        x = [r[0] for r in rows]
        for j, name in enumerate(header[1:], start=1):
            ax.plot(x, [r[j] for r in rows], label=name)
        ax.set_xlabel("Pressure (Pa)")
        ax.set_ylabel(f"{ylabel} (m)")
        ax.legend()

    return plot


_REGION_COLOURS = {"normal": "#ffffff", "transition": "#fde0b6", "linear_touch": "#d5ecd4", "saturation": "#f4cccc"}


def _curve_plot(curve: CPCurve, tps: dict):
    def plot(ax):
        p, c = curve.pressures, curve.capacitances
        regions = [r.value for r in curve.regions]
        start = 0
        for i in range(1, len(p) + 1):
            if i == len(p) or regions[i] != regions[start]:
                hi = p[i] if i < len(p) else p[-1]
                ax.axvspan(p[start], hi, color=_REGION_COLOURS[regions[start]], lw=0)
                start = i
        ax.plot(p, c, color="k", lw=1.2)
        for name, tp in sorted(tps.items()):
            if p[0] <= tp <= p[-1]:
                ax.axvline(tp, ls="--", lw=0.8, color="tab:red")
                ax.annotate(name.split("_")[0].upper(), (tp, c.max()), fontsize=8)
        ax.set_xlabel("Pressure (Pa)")
        ax.set_ylabel("Capacitance (F)")

    return plot
