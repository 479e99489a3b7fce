import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capsense.capacitance import CPCurve, capacitance_pressure_curve
from capsense.core import DEFAULT_MATERIAL, Circle, DiaphragmGeometry, InvalidArgumentError, SensorStack
from capsense.metrics import (
    LinearFit,
    aggregate,
    curve_summary,
    linear_fit,
    minimax_line,
    nonlinearity,
    read_curve_csv,
    sensitivity,
    widest_linear_window,
    widest_linear_window_bruteforce,
)
from capsense.plates import PlateConfig


def curve(p, c):
    return CPCurve.from_arrays(p, c)


def test_exact_line():
    x = np.linspace(0, 10, 11)
    fit = linear_fit(zip(x, 2 * x + 1))
    assert fit.slope == pytest.approx(2.0, rel=1e-14)
    assert fit.intercept == pytest.approx(1.0, abs=1e-13)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-14)


def test_constant_data_has_zero_r2():
    fit = linear_fit([(0, 3.0), (1, 3.0), (2, 3.0)])
    assert fit.slope == 0.0
    assert fit.r_squared == 0.0


def test_hand_computed_fit():
    # x = 1..5, y = 2, 4, 5, 4, 5: Sxx = 10, Sxy = 6, Syy = 6
    fit = linear_fit(zip([1, 2, 3, 4, 5], [2, 4, 5, 4, 5]))
    assert fit.slope == pytest.approx(0.6, rel=1e-14)
    assert fit.intercept == pytest.approx(2.2, rel=1e-14)
    assert fit.r_squared == pytest.approx(0.6, rel=1e-13)


def test_fit_validation():
    with pytest.raises(InvalidArgumentError):
        linear_fit([(1.0, 2.0), (1.0, 3.0)])
    with pytest.raises(InvalidArgumentError):
        LinearFit(1.0, 0.0, 1.5, (0.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        LinearFit(1.0, 0.0, 0.5, (1.0, 1.0))


def test_sensitivity_of_line_is_exact():
    p = np.linspace(0, 40, 41)
    assert sensitivity(curve(p, 3e-15 * p + 1e-11), (0, 40)) == pytest.approx(3e-15, rel=1e-12)


def test_sensitivity_window_selects_points():
    p = np.linspace(0, 10, 11)
    c = np.where(p <= 5, p, 5 + 3 * (p - 5))
    assert sensitivity(curve(p, c), (0, 5)) == pytest.approx(1.0)
    assert sensitivity(curve(p, c), (5, 10)) == pytest.approx(3.0)
    with pytest.raises(InvalidArgumentError):
        sensitivity(curve(p, c), (0.2, 0.8))


def test_parabola_nonlinearity():
    x = np.linspace(0, 1, 2001)
    assert nonlinearity(curve(x, x**2), (0, 1)) == pytest.approx(0.125, abs=1e-6)
    assert nonlinearity(curve(x, x**2), (0, 1), method="ols") == pytest.approx(1 / 6, abs=1e-3)


def test_minimax_line_of_triangle():
    m, b, dev = minimax_line([0, 1, 2], [0, 1, 0])
    assert m == pytest.approx(0.0, abs=1e-15)
    assert b == pytest.approx(0.5)
    assert dev == pytest.approx(0.5)


@given(st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-3), st.floats(-1e3, 1e3))
def test_nonlinearity_affine_invariant(a, b):
    p = np.linspace(0, 40, 41)
    c = 1e-11 + 1e-13 * p + 4e-16 * p**2
    base = nonlinearity(curve(p, c), (0, 40))
    assert nonlinearity(curve(p, a * c + b * 1e-11), (0, 40)) == pytest.approx(base, rel=1e-6)


@given(st.floats(1e-3, 1e3))
def test_sensitivity_scales_linearly(alpha):
    p = np.linspace(0, 40, 41)
    c = 1e-11 + 1e-13 * p + 4e-16 * p**2
    assert sensitivity(curve(p, alpha * c), (0, 40)) == pytest.approx(alpha * sensitivity(curve(p, c), (0, 40)), rel=1e-10)


def test_circle_curve_is_convex_and_positive():
    plate = PlateConfig(DiaphragmGeometry(Circle(0.01), 25e-6), DEFAULT_MATERIAL)
    cv = capacitance_pressure_curve(plate, SensorStack(3e-3), np.linspace(0, 40, 41))
    c = cv.capacitances
    assert sensitivity(cv, (0, 40)) > 0
    assert np.all(np.diff(c, 2) > 0)
    assert 0 < nonlinearity(cv, (0, 40)) < 0.5


def test_window_found_in_piecewise_curve():
    p = np.linspace(0, 50e3, 51)
    c = np.where(p < 10e3, 1 + 0.5 * (p / 1e4) ** 2 - 1.0 * (p / 1e4),
                 np.where(p <= 40e3, 0.5 + 0.1 * (p / 1e4 - 1), 0.8 + 2 * (p / 1e4 - 4) ** 2))
    fit = widest_linear_window(curve(p, c), 0.999)
    lo, hi = fit.window
    assert 9e3 <= lo and hi <= 41e3
    assert hi - lo >= 29e3


def test_window_none_and_short_curve():
    # every 3-point window of a zigzag has R^2 = 0
    noise = curve(np.arange(30.0), np.tile([0.0, 1.0], 15))
    assert widest_linear_window(noise, 0.9999) is None
    with pytest.raises(InvalidArgumentError):
        widest_linear_window(curve([0.0, 1.0], [0.0, 1.0]))
    with pytest.raises(InvalidArgumentError):
        widest_linear_window(noise, 0.0)


@given(
    st.integers(3, 60),
    st.floats(0.5, 0.9999),
    st.integers(0, 2**31 - 1),
)
def test_window_matches_bruteforce(n, r2_min, seed):
    rng = np.random.default_rng(seed)
    p = np.cumsum(rng.uniform(0.1, 2.0, n))
    c = np.cumsum(rng.normal(1.0, 0.3, n))
    cv = curve(p, c)
    fast = widest_linear_window(cv, r2_min)
    slow = widest_linear_window_bruteforce(cv, r2_min)
    if slow is None:
        assert fast is None
    else:
        assert fast.window == slow.window


def test_window_matches_bruteforce_on_touch_like_curve():
    p = np.linspace(0, 1e5, 200)
    c = np.sqrt(p + 5e3) + 1e-3 * np.sin(p / 3e3)
    cv = curve(p, c)
    for r2 in (0.99, 0.999):
        assert widest_linear_window(cv, r2).window == widest_linear_window_bruteforce(cv, r2).window


def test_window_search_is_fast_for_500_points():
    p = np.linspace(0, 1e5, 500)
    cv = curve(p, np.sqrt(p + 1e4))
    start = time.perf_counter()
    widest_linear_window(cv, 0.999)
    assert time.perf_counter() - start < 2.0


def test_csv_ingest_and_summary(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("capacitance_f,pressure_pa\n3e-12,20\n1e-12,0\n2e-12,10\n")
    cv = read_curve_csv(path)
    assert list(cv.pressures) == [0.0, 10.0, 20.0]
    s = curve_summary(cv)
    assert s["sensitivity_f_per_pa"] == pytest.approx(1e-13)
    assert s["linear_window_pa"] == [0.0, 20.0]
    assert aggregate([cv, cv]) == [s, s]
    bad = tmp_path / "bad.csv"
    bad.write_text("p,c\n0,1\n")
    with pytest.raises(InvalidArgumentError):
        read_curve_csv(bad)
