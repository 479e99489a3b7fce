import json
import math

import numpy as np
import pytest
from scipy import ndimage

from capsense.cantilever import CantileverSpec
from capsense.core import Circle, Ellipse, InvalidArgumentError, Material, Pentagon, Rectangle, Square
from capsense.oracle import (
    GridPlate,
    calibrate_rectangle,
    circle_reference,
    convergence_study,
    field_summary,
    max_deflection,
    richardson,
    solve_beam,
    solve_plate,
    write_field_csv,
    write_field_summary,
)
from capsense.plates import RECTANGLE_COEFFS, RECTANGLE_RATIOS


@pytest.fixture(scope="module")
def circle_257():
    return solve_plate(GridPlate.with_nodes(Circle(1.0), 257, 1.0, 64.0))


@pytest.fixture(scope="module")
def circle_129():
    return solve_plate(GridPlate.with_nodes(Circle(1.0), 129, 1.0, 64.0))


def test_zero_load_gives_zero_field():
    sol = solve_plate(GridPlate.with_nodes(Square(1.0), 33, 1.0, 0.0))
    assert sol.iterations == 0
    assert not sol.W.any()


def test_circle_anchor_257(circle_257):
    w, (x, y) = max_deflection(circle_257)
    assert w == pytest.approx(1.0, rel=0.02)
    assert (x, y) == (0.0, 0.0)
    assert circle_257.residual < 1e-8


def test_field_nonnegative_and_zero_outside(circle_129):
    W = circle_129.W
    assert W.min() >= 0.0
    assert not W[~circle_129.mask].any()


def test_circle_field_symmetry(circle_129):
    W = circle_129.W
    scale = W.max()
    assert np.max(np.abs(W - W[::-1, :])) < 1e-8 * scale
    assert np.max(np.abs(W - W[:, ::-1])) < 1e-8 * scale
    assert np.max(np.abs(W - W.T)) < 1e-8 * scale


def test_square_field_symmetry():
    sol = solve_plate(GridPlate.with_nodes(Square(1.0), 65, 1.0, 1.0))
    W = sol.W
    assert np.max(np.abs(W - W.T)) < 1e-8 * W.max()
    assert np.max(np.abs(W - W[::-1, :])) < 1e-8 * W.max()


@pytest.mark.parametrize("shape", [Circle(1.0), Ellipse(1.0, 0.4), Square(1.0), Rectangle(2.0, 0.5), Pentagon(1.0)])
def test_mask_is_connected(shape):
    mask = GridPlate.with_nodes(shape, 65, 1.0, 1.0).mask()
    assert mask.any()
    _, n = ndimage.label(mask)  # default structure is 4-connectivity
    assert n == 1


def test_linearity_in_load():
    g1 = GridPlate.with_nodes(Pentagon(1.0), 65, 1.0, 1.0)
    g2 = GridPlate.with_nodes(Pentagon(1.0), 65, 1.0, 2.0)
    W1, W2 = solve_plate(g1).W, solve_plate(g2).W
    assert np.max(np.abs(W2 - 2 * W1)) <= 1e-12 * W2.max()


def test_square_coefficient_band():
    w, loc = max_deflection(solve_plate(GridPlate.with_nodes(Square(1.0), 257, 1.0, 1.0)))
    assert 0.00120 <= w <= 0.00135
    assert loc == (0.0, 0.0)


def test_pentagon_within_15_percent():
    w, _ = max_deflection(solve_plate(GridPlate.with_nodes(Pentagon(1.0), 257, 1.0, 1.0)))
    assert w == pytest.approx(0.0041, rel=0.15)


def test_circle_error_quarters_when_spacing_halves():
    ref = circle_reference(1.0, 1.0, 64.0)
    errs = [abs(max_deflection(solve_plate(GridPlate.with_nodes(Circle(1.0), n, 1.0, 64.0)))[0] - ref) for n in (65, 129, 257)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.0 < coarse / fine < 5.5


def test_circle_richardson_within_0p2_percent():
    h = [2.0 / 64, 2.0 / 128, 2.0 / 256]
    study = convergence_study(Circle(1.0), 1.0, 64.0, h)
    assert 1.5 <= study.order <= 2.5
    assert study.extrapolated == pytest.approx(1.0, rel=2e-3)
    assert [r[0] for r in study.rows()] == h


def test_square_observed_order():
    study = convergence_study(Square(1.0), 1.0, 1.0, [1 / 64, 1 / 128, 1 / 256])
    assert 1.5 <= study.order <= 2.5


@pytest.mark.parametrize("ratio", [0.25, 0.5, 0.75])
def test_ellipse_oracle_matches_consistent_formula(ratio):
    a, b = 1.0, ratio
    w, _ = max_deflection(solve_plate(GridPlate.with_nodes(Ellipse(a, b), 257, 1.0, 1.0)))
    exact = a**4 * b**4 / (8 * (3 * a**4 + 2 * a**2 * b**2 + 3 * b**4))
    assert w == pytest.approx(exact, rel=0.03)


def test_richardson_on_exact_quadratic():
    h = np.array([0.4, 0.2, 0.1])
    order, limit = richardson(h, 3.0 + 5.0 * h**2)
    assert order == pytest.approx(2.0, rel=1e-10)
    assert limit == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        richardson([0.4, 0.3, 0.1], [1.0, 1.0, 1.0])


def test_rectangle_table_reproduces():
    got = calibrate_rectangle([1.0, 0.5])
    for ratio in (1.0, 0.5):
        stored = RECTANGLE_COEFFS[np.isclose(RECTANGLE_RATIOS, ratio)][0]
        assert got[ratio] == pytest.approx(stored, rel=1e-6)


def test_beam_oracle_unit_case():
    spec = CantileverSpec(1.0, 1.0, 1.0, Material(12.0, 0.3, 1.0))
    assert solve_beam(spec, 8.0, 10_000) == pytest.approx(1.0, rel=0.01)
    assert solve_beam(spec, 16.0, 1_000) == pytest.approx(2 * solve_beam(spec, 8.0, 1_000), rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        solve_beam(spec, 1.0, 50)


def test_field_export(tmp_path, circle_129):
    csv_path = tmp_path / "field.csv"
    write_field_csv(circle_129, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x_m,y_m,w_m"
    assert len(lines) - 1 == int(circle_129.mask.sum())
    json_path = tmp_path / "summary.json"
    write_field_summary(circle_129, json_path)
    summary = json.loads(json_path.read_text())
    assert summary == json.loads(json.dumps(field_summary(circle_129)))
    assert summary["max_w_m"] == pytest.approx(1.0, rel=0.02)
    assert summary["residual"] < 1e-8
