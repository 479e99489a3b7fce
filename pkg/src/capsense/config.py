"""JSON configuration documents: unit-suffixed quantities, schema checks and model construction."""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from .capacitance import DielectricStack
from .core import (
    DEFAULT_MATERIAL,
    MATERIALS,
    Cantilever,
    CapsenseError,
    Circle,
    DiaphragmGeometry,
    Ellipse,
    Material,
    Pentagon,
    Rectangle,
    SecondCavity,
    SensorStack,
    Square,
)
from .plates import FormulaMode, PlateConfig


class ConfigError(CapsenseError, ValueError):
    """Invalid configuration; ``path`` names the offending field (dotted)."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.detail = message


UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
    "density": {"kg/m3": 1.0, "g/cm3": 1e3},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*)?$")


def parse_quantity(value: Any, kind: str, path: str = "") -> float:
    """Number (SI) or string with a unit suffix, e.g. "25um", "1.2 cm", "40kPa"."""
    if isinstance(value, bool):
        raise ConfigError("expected a number or a unit-suffixed string", path)
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        m = _QUANTITY.match(value)
        if not m:
            raise ConfigError(f"cannot parse quantity {value!r}", path)
        number, unit = float(m.group(1)), (m.group(2) or "").strip()
        if not unit:
            out = number
        else:
            scale = UNITS.get(kind, {}).get(unit)
            if scale is None:
                raise ConfigError(f"unknown {kind} unit {unit!r}; expected one of {sorted(UNITS.get(kind, {}))}", path)
            out = number * scale
    else:
        raise ConfigError("expected a number or a unit-suffixed string", path)
    if not math.isfinite(out):
        raise ConfigError("quantity must be finite", path)
    return out


_Q = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_RANGE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"start": _Q, "stop": _Q, "points": {"type": "integer", "minimum": 1}},
    "required": ["start", "stop", "points"],
}
_LIST = {"type": "array", "items": _Q, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry"],
    "properties": {
        "material": {
            "oneOf": [
                {"type": "string", "enum": sorted(MATERIALS)},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["youngs_modulus", "poisson_ratio", "density"],
                    "properties": {
                        "name": {"type": "string"},
                        "youngs_modulus": _Q,
                        "poisson_ratio": {"type": "number"},
                        "density": _Q,
                    },
                },
            ]
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["shape", "thickness"],
            "properties": {
                "shape": {"enum": ["circle", "ellipse", "square", "rectangle", "pentagon", "cantilever"]},
                "thickness": _Q,
                "radius": _Q,
                "semi_major": _Q,
                "semi_minor": _Q,
                "side": _Q,
                "a": _Q,
                "b": _Q,
                "edge": _Q,
                "length": _Q,
                "width": _Q,
            },
        },
        "built_in_stress": _Q,
        "stack": {
            "type": "object",
            "additionalProperties": False,
            "required": ["gap"],
            "properties": {
                "gap": _Q,
                "layers": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["thickness", "permittivity"],
                        "properties": {"thickness": _Q, "permittivity": {"type": "number"}},
                    },
                },
                "second_cavity": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["hole_radius", "step_depth"],
                    "properties": {"hole_radius": _Q, "step_depth": _Q, "step_permittivity": {"type": "number"}},
                },
            },
        },
        "pressure": _Q,
        "pressures": {"oneOf": [_LIST, _RANGE]},
        "frequency": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"start": _Q, "stop": _Q, "points": {"type": "integer", "minimum": 2}, "amplitude": _Q},
        },
        "modes": {"type": "integer", "minimum": 1, "maximum": 50},
        "formula_mode": {"enum": ["paper_exact", "paper-exact", "consistent"]},
        "profile": {"enum": ["oracle", "product"]},
        "theory": {"enum": ["small", "large"]},
        "oracle_nodes": {"type": "integer", "minimum": 17},
        "region_thresholds": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "r2_min": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"nodes": {"type": "array", "items": {"type": "integer", "minimum": 9}, "minItems": 3}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameters"],
            "properties": {
                "parameters": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["path"],
                        "properties": {
                            "path": {"type": "string"},
                            "start": _Q,
                            "stop": _Q,
                            "steps": {"type": "integer", "minimum": 1},
                            "values": _LIST,
                            "scale": {"enum": ["linear", "log"]},
                        },
                    },
                }
            },
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "required": ["objective", "dimensions"],
            "properties": {
                "objective": {"enum": ["max_sensitivity", "min_nonlinearity"]},
                "dimensions": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["path", "lo", "hi"],
                        "properties": {
                            "path": {"type": "string"},
                            "lo": _Q,
                            "hi": _Q,
                            "steps": {"type": "integer", "minimum": 2},
                        },
                    },
                },
                "constraints": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["type"],
                        "properties": {
                            "type": {"enum": ["linear_window_covers", "touch_point_outside", "dimension_bounds"]},
                            "p_lo": _Q,
                            "p_hi": _Q,
                            "path": {"type": "string"},
                            "lo": _Q,
                            "hi": _Q,
                        },
                    },
                },
                "refine_iterations": {"type": "integer", "minimum": 0, "maximum": 200},
            },
        },
        "spl": {
            "type": "object",
            "additionalProperties": False,
            "required": ["value", "direction"],
            "properties": {"value": {"type": "number"}, "direction": {"enum": ["to_pa", "to_db"]}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["csv", "json", "svg"]}, "prefix": {"type": "string"}},
        },
    },
}

# unit kind of every quantity field that sweeps and searches may address
FIELD_KINDS = {
    "geometry.thickness": "length",
    "geometry.radius": "length",
    "geometry.semi_major": "length",
    "geometry.semi_minor": "length",
    "geometry.side": "length",
    "geometry.a": "length",
    "geometry.b": "length",
    "geometry.edge": "length",
    "geometry.length": "length",
    "geometry.width": "length",
    "built_in_stress": "pressure",
    "stack.gap": "length",
    "stack.second_cavity.hole_radius": "length",
    "stack.second_cavity.step_depth": "length",
    "stack.second_cavity.step_permittivity": "none",
    "material.youngs_modulus": "pressure",
    "material.poisson_ratio": "none",
    "material.density": "density",
    "pressure": "pressure",
}

_SHAPE_FIELDS = {
    "circle": ("radius",),
    "ellipse": ("semi_major", "semi_minor"),
    "square": ("side",),
    "rectangle": ("a", "b"),
    "pentagon": ("edge",),
    "cantilever": ("length", "width"),
}


def _path(parts) -> str:
    return ".".join(str(p) for p in parts)


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _path(err.absolute_path) or "<root>")


def load(path: str | Path) -> "SensorConfig":
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    return SensorConfig.from_doc(doc)


def _build(fn, path: str):
    """Run a constructor and re-raise its validation errors with a field path."""
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from None


def get_path(doc: dict, dotted: str):
    node = doc
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError("no such field", dotted)
        node = node[key]
    return node


def set_path(doc: dict, dotted: str, value) -> dict:
    """Copy of ``doc`` with the dotted field set; parents are created when missing."""
    if dotted not in FIELD_KINDS:
        raise ConfigError(f"not a numeric design field; choose from {sorted(FIELD_KINDS)}", dotted)
    out = copy.deepcopy(doc)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        if key == "material" and isinstance(node.get(key), str):
            base = MATERIALS[node[key]]
            node[key] = {
                "name": base.name,
                "youngs_modulus": base.youngs_modulus,
                "poisson_ratio": base.poisson_ratio,
                "density": base.density,
            }
        node = node.setdefault(key, {})
    node[keys[-1]] = value
    return out


@dataclass(frozen=True)
class SensorConfig:
    doc: dict
    material: Material
    geometry: DiaphragmGeometry
    built_in_stress: float
    stack: SensorStack | None

    @classmethod
    def from_doc(cls, doc: Any) -> "SensorConfig":
        validate(doc)
        material = _material(doc.get("material", DEFAULT_MATERIAL.name))
        geometry = _geometry(doc["geometry"])
        stress = parse_quantity(doc.get("built_in_stress", 0.0), "pressure", "built_in_stress")
        stack = _stack(doc["stack"]) if "stack" in doc else None
        if stack is not None:
            _build(lambda: stack.check_fits(geometry.shape), "stack.second_cavity.hole_radius")
        if geometry.is_plate:
            _build(lambda: PlateConfig(geometry, material, stress), "built_in_stress")
        cfg = cls(doc, material, geometry, stress, stack)
        cfg.pressures()  # fail early on malformed pressure lists
        _build(lambda: cfg.formula_mode, "formula_mode")
        lo, hi = cfg.region_thresholds
        if not 0 < lo < hi < 1:
            raise ConfigError("thresholds must satisfy 0 < low < high < 1", "region_thresholds")
        return cfg

    def with_value(self, dotted: str, value: float) -> "SensorConfig":
        return SensorConfig.from_doc(set_path(self.doc, dotted, value))

    @property
    def plate(self) -> PlateConfig:
        if not self.geometry.is_plate:
            raise ConfigError("this command needs a clamped diaphragm, not a cantilever", "geometry.shape")
        return PlateConfig(self.geometry, self.material, self.built_in_stress)

    def require_stack(self) -> SensorStack:
        if self.stack is None:
            raise ConfigError("this command needs a stack with a gap", "stack")
        return self.stack

    @property
    def formula_mode(self) -> FormulaMode:
        return FormulaMode.parse(self.doc.get("formula_mode", "consistent"))

    @property
    def profile(self) -> str:
        return self.doc.get("profile", "oracle")

    @property
    def theory(self) -> str:
        return self.doc.get("theory", "small")

    @property
    def oracle_nodes(self) -> int:
        return int(self.doc.get("oracle_nodes", 129))

    @property
    def region_thresholds(self) -> tuple[float, float]:
        lo, hi = self.doc.get("region_thresholds", (0.1, 0.9))
        return float(lo), float(hi)

    @property
    def r2_min(self) -> float:
        return float(self.doc.get("r2_min", 0.999))

    @property
    def reference_pressure(self) -> float:
        if "pressure" in self.doc:
            return parse_quantity(self.doc["pressure"], "pressure", "pressure")
        return self.pressures()[-1]

    def pressures(self) -> list[float]:
        """Pressure samples in Pa: explicit list, {start, stop, points} range, or the single ``pressure``."""
        spec = self.doc.get("pressures")
        if spec is None:
            if "pressure" in self.doc:
                return [parse_quantity(self.doc["pressure"], "pressure", "pressure")]
            return [0.0, 10.0, 20.0, 30.0, 40.0]
        if isinstance(spec, list):
            vals = [parse_quantity(v, "pressure", f"pressures.{i}") for i, v in enumerate(spec)]
        else:
            start = parse_quantity(spec["start"], "pressure", "pressures.start")
            stop = parse_quantity(spec["stop"], "pressure", "pressures.stop")
            n = spec["points"]
            if n == 1:
                vals = [start]
            else:
                if not stop > start:
                    raise ConfigError("stop must exceed start", "pressures.stop")
                vals = [start + (stop - start) * i / (n - 1) for i in range(n)]
        if any(v < 0 for v in vals):
            raise ConfigError("pressures must be >= 0", "pressures")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("pressures must be strictly ascending", "pressures")
        return vals

    def frequencies(self) -> tuple[list[float], float]:
        """Log-spaced sweep frequencies (Hz) and the drive amplitude (Pa); 20 Hz to 20 kHz by default."""
        spec = self.doc.get("frequency", {})
        start = parse_quantity(spec.get("start", 20.0), "frequency", "frequency.start")
        stop = parse_quantity(spec.get("stop", 20e3), "frequency", "frequency.stop")
        n = int(spec.get("points", 200))
        amp = parse_quantity(spec.get("amplitude", 1.0), "pressure", "frequency.amplitude")
        if not 0 < start < stop:
            raise ConfigError("need 0 < start < stop", "frequency")
        if not amp > 0:
            raise ConfigError("amplitude must be positive", "frequency.amplitude")
        ratio = stop / start
        return [start * ratio ** (i / (n - 1)) for i in range(n)], amp


def _material(spec) -> Material:
    if isinstance(spec, str):
        return MATERIALS[spec]
    return _build(
        lambda: Material(
            youngs_modulus=parse_quantity(spec["youngs_modulus"], "pressure", "material.youngs_modulus"),
            poisson_ratio=float(spec["poisson_ratio"]),
            density=parse_quantity(spec["density"], "density", "material.density"),
            name=spec.get("name", "custom"),
        ),
        "material",
    )


def _geometry(spec: dict) -> DiaphragmGeometry:
    kind = spec["shape"]
    fields = _SHAPE_FIELDS[kind]
    extra = sorted(set(spec) - set(fields) - {"shape", "thickness"})
    if extra:
        raise ConfigError(f"field not used by a {kind}", f"geometry.{extra[0]}")
    vals = []
    for name in fields:
        if name not in spec:
            raise ConfigError(f"required for a {kind}", f"geometry.{name}")
        vals.append(parse_quantity(spec[name], "length", f"geometry.{name}"))
    cls = {"circle": Circle, "ellipse": Ellipse, "square": Square, "rectangle": Rectangle, "pentagon": Pentagon,
           "cantilever": Cantilever}[kind]
    shape = _build(lambda: cls(*vals), f"geometry.{fields[0]}")
    thickness = parse_quantity(spec["thickness"], "length", "geometry.thickness")
    return _build(lambda: DiaphragmGeometry(shape, thickness), "geometry.thickness")


def _stack(spec: dict) -> SensorStack:
    gap = parse_quantity(spec["gap"], "length", "stack.gap")
    layers = []
    for i, lay in enumerate(spec.get("layers", [])):
        t = parse_quantity(lay["thickness"], "length", f"stack.layers.{i}.thickness")
        layers.append((t, float(lay["permittivity"])))
        _build(lambda: DielectricStack((layers[-1],)), f"stack.layers.{i}")
    cavity = None
    if "second_cavity" in spec:
        sc = spec["second_cavity"]
        cavity = _build(
            lambda: SecondCavity(
                parse_quantity(sc["hole_radius"], "length", "stack.second_cavity.hole_radius"),
                parse_quantity(sc["step_depth"], "length", "stack.second_cavity.step_depth"),
                float(sc.get("step_permittivity", 3.4)),
            ),
            "stack.second_cavity",
        )
    return _build(lambda: SensorStack(gap, tuple(layers), cavity), "stack.gap")
