"""Design models for clamped-diaphragm and cantilever capacitive pressure sensors."""

from .capacitance import CPCurve, DielectricStack, Region, capacitance_at, capacitance_pressure_curve
from .cantilever import CantileverSpec, characteristic_roots, harmonic_response, mode_frequencies
from .core import (
    DEFAULT_MATERIAL,
    MATERIALS,
    Cantilever,
    CapsenseError,
    Circle,
    DiaphragmGeometry,
    Ellipse,
    HarmonicLoad,
    InvalidArgumentError,
    Material,
    NumericalError,
    Pentagon,
    Rectangle,
    SecondCavity,
    SensorStack,
    Square,
    StaticLoad,
    TouchRegimeError,
    WrongGeometryError,
    pressure_to_spl,
    spl_to_pressure,
)
from .metrics import LinearFit, linear_fit, nonlinearity, sensitivity, widest_linear_window
from .plates import FormulaMode, PlateConfig, max_deflection_large, max_deflection_small, touch_point_pressure
from .touch import StepCavity, TouchSensorConfig, classify_region, touch_curve

__version__ = "0.1.0"
