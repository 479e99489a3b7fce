import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from capsense.cli import main

CIRCLE = {
    "material": "PI",
    "geometry": {"shape": "circle", "radius": "1 cm", "thickness": "25um"},
    "stack": {"gap": "3mm"},
    "pressures": {"start": 0, "stop": "40Pa", "points": 9},
    "pressure": "40Pa",
    "profile": "product",
}
TOUCH = {
    "geometry": {"shape": "circle", "radius": "12mm", "thickness": "25um"},
    "stack": {"gap": "400um", "layers": [{"thickness": "25um", "permittivity": 3.4}]},
    "pressures": {"start": 0, "stop": "20kPa", "points": 41},
}
CANTILEVER = {
    "geometry": {"shape": "cantilever", "length": "2cm", "width": "7.5mm", "thickness": "25um"},
    "frequency": {"start": "20Hz", "stop": "20kHz", "points": 50, "amplitude": "1Pa"},
}


def run(tmp_path, doc, *args, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    out = tmp_path / "out"
    code = main([args[0], "--config", str(path), "--out", str(out), *args[1:]])
    return code, out


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def fail(tmp_path, capsys, doc, *args):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, doc, *args)
    return info.value.code, json.loads(capsys.readouterr().err)


def test_deflect_with_oracle(tmp_path):
    code, out = run(tmp_path, {**CIRCLE, "oracle_nodes": 65}, "deflect", "--oracle")
    assert code == 0
    report = read_json(out / "deflect.json")["report"]
    assert report["w0_oracle_m"] == pytest.approx(report["w0_consistent_m"], rel=2e-3)
    header = read_csv(out / "deflect.csv")[0]
    assert header[0] == "pressure_pa" and "w0_oracle_m" in header


def test_cap_curve_outputs(tmp_path):
    code, out = run(tmp_path, CIRCLE, "cap-curve", "--format", "csv", "--format", "json", "--format", "svg")
    assert code == 0
    rows = read_csv(out / "cap_curve.csv")
    assert rows[0][:3] == ["pressure_pa", "capacitance_f", "delta_c_f"]
    assert len(rows) == 10
    assert rows[1][1] == f"{float(rows[1][1]):.8e}"
    svg = (out / "cap_curve.svg").read_text()
    assert svg.startswith("<?xml") and "<dc:date>" not in svg


def test_touch_curve_reports_regions(tmp_path):
    code, out = run(tmp_path, TOUCH, "touch-curve")
    doc = read_json(out / "touch_curve.json")
    assert doc["report"]["mode"] == "single"
    assert set(doc["report"]["region_onsets_pa"]) >= {"normal", "linear_touch"}
    regions = [r[-1] for r in doc["rows"]]
    assert regions[0] == "normal"


def test_modes(tmp_path):
    code, out = run(tmp_path, CANTILEVER, "modes")
    report = read_json(out / "modes.json")["report"]
    assert report["f2_over_f1"] == pytest.approx(6.2669, rel=1e-4)
    assert (out / "modes_frequencies.csv").exists()


def test_spl_without_config(tmp_path, capsys):
    assert main(["spl", "--value", "94", "--direction", "to_pa", "--out", str(tmp_path)]) == 0
    report = read_json(tmp_path / "spl.json")["report"]
    assert report["output"] == pytest.approx(1.00237447, rel=1e-8)


def test_oracle_command(tmp_path):
    doc = {**CIRCLE, "oracle": {"nodes": [33, 65, 129]}}
    code, out = run(tmp_path, doc, "oracle")
    report = read_json(out / "oracle.json")["report"]
    assert report["observed_order"] == pytest.approx(2.0, abs=0.3)
    assert report["extrapolated_relative_gap"] < 2e-3
    assert (out / "oracle_field.csv").exists()


@pytest.mark.parametrize(
    "doc, path",
    [
        ({**CIRCLE, "colour": "red"}, "<root>"),
        ({**CIRCLE, "geometry": {"shape": "circle", "thickness": "25um"}}, "geometry.radius"),
        ({**CIRCLE, "geometry": {"shape": "circle", "radius": "1 furlong", "thickness": "25um"}}, "geometry.radius"),
        ({**CIRCLE, "geometry": {"shape": "hexagon", "radius": 1, "thickness": 1}}, "geometry.shape"),
        ({**CIRCLE, "stack": {"gap": "3mm", "layers": [{"thickness": 1}]}}, "stack.layers.0"),
        ({**CIRCLE, "region_thresholds": [0.9, 0.1]}, "region_thresholds"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, doc, path):
    code, err = fail(tmp_path, capsys, doc, "cap-curve")
    assert code == 2
    assert err["error"] == "config"
    assert err["path"] == path


def test_bad_json_and_missing_file(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(SystemExit) as info:
        main(["deflect", "--config", str(tmp_path / "bad.json")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["deflect", "--config", str(tmp_path / "missing.json")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["explode"])
    assert info.value.code == 2


def test_touching_normal_curve_is_numerical_error(tmp_path, capsys):
    doc = {**CIRCLE, "stack": {"gap": "10um"}, "pressures": [0, "40Pa"]}
    code, err = fail(tmp_path, capsys, doc, "cap-curve")
    assert code == 3
    assert err["error"] == "numerical"


def test_infeasible_search_exits_4(tmp_path, capsys):
    doc = {
        **TOUCH,
        "search": {
            "objective": "max_sensitivity",
            "dimensions": [{"path": "geometry.radius", "lo": "5mm", "hi": "6mm", "steps": 2}],
            "constraints": [{"type": "touch_point_outside", "p_lo": "1Pa", "p_hi": "1GPa"}],
        },
    }
    code, err = fail(tmp_path, capsys, doc, "search")
    assert code == 4
    assert err["error"] == "infeasible"


def test_output_is_byte_identical_across_runs_and_threads(tmp_path, monkeypatch):
    doc = {**CIRCLE, "geometry": {"shape": "pentagon", "edge": "13.5mm", "thickness": "25um"},
           "profile": "oracle", "oracle_nodes": 65}
    blobs = []
    for i, threads in enumerate(["1", "4", "4"]):
        monkeypatch.setenv("CAPSENSE_THREADS", threads)
        sub = tmp_path / f"run{i}"
        sub.mkdir()
        _, out = run(sub, doc, "cap-curve", "--format", "csv", "--format", "json", "--format", "svg")
        blobs.append([(out / n).read_bytes() for n in ("cap_curve.csv", "cap_curve.json", "cap_curve.svg")])
    assert blobs[0] == blobs[1] == blobs[2]


def test_json_round_trips_and_has_no_nan(tmp_path):
    doc = {**CIRCLE, "sweep": {"parameters": [{"path": "stack.gap", "values": ["1um", "3mm"]}]}}
    _, out = run(tmp_path, doc, "sweep")
    text = (out / "sweep.json").read_text()
    assert "NaN" not in text
    parsed = json.loads(text)
    assert json.dumps(parsed, indent=2, sort_keys=True, ensure_ascii=False) + "\n" == text
    values = {(r[0], r[2]): r[3] for r in parsed["rows"]}
    assert values[(0, "sensitivity_f_per_pa")] is None


def test_single_point_sweep_matches_single_run(tmp_path):
    doc = {**CIRCLE, "sweep": {"parameters": [{"path": "geometry.radius", "values": ["1cm"]}]}}
    _, out = run(tmp_path, doc, "sweep")
    rows = {r[2]: r[3] for r in read_json(out / "sweep.json")["rows"]}
    _, out2 = run(tmp_path, CIRCLE, "deflect", name="d.json")
    assert rows["w0_m"] == read_json(out2 / "deflect.json")["report"]["w0_m"]
    _, out3 = run(tmp_path, CIRCLE, "cap-curve", name="c.json")
    report = read_json(out3 / "cap_curve.json")["report"]
    assert rows["sensitivity_f_per_pa"] == report["sensitivity_f_per_pa"]


def test_sweep_grid_size_and_radius_scaling(tmp_path):
    doc = {
        **CIRCLE,
        "sweep": {
            "parameters": [
                {"path": "geometry.radius", "start": "5mm", "stop": "20mm", "steps": 4, "scale": "log"},
                {"path": "stack.gap", "values": ["2mm", "3mm", "4mm"]},
            ]
        },
    }
    _, out = run(tmp_path, doc, "sweep")
    parsed = read_json(out / "sweep.json")
    assert parsed["report"]["points"] == 12
    assert len({r[0] for r in parsed["rows"]}) == 12
    w = [(r[1], r[4]) for r in parsed["rows"] if r[3] == "w0_m" and r[2] == pytest.approx(2e-3)]
    radius, w0 = np.array(w).T
    slope = np.polyfit(np.log(radius), np.log(w0), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.01)


def test_sweep_rejects_unknown_path(tmp_path, capsys):
    doc = {**CIRCLE, "sweep": {"parameters": [{"path": "geometry.colour", "values": [1]}]}}
    code, err = fail(tmp_path, capsys, doc, "sweep")
    assert code == 2 and err["path"] == "sweep.parameters.0.path"


def test_search_monotone_objective_hits_upper_bound(tmp_path):
    doc = {
        **CIRCLE,
        "search": {
            "objective": "max_sensitivity",
            "dimensions": [{"path": "geometry.radius", "lo": "3mm", "hi": "8mm", "steps": 6}],
        },
    }
    _, out = run(tmp_path, doc, "search")
    parsed = read_json(out / "search.json")
    assert parsed["report"]["best"]["geometry.radius"] == pytest.approx(8e-3, rel=1e-9)
    grid = [r for r in parsed["rows"] if r[1] == "grid"]
    assert parsed["report"]["best_objective"] >= max(r[3] for r in grid)


def test_search_result_passes_constraints(tmp_path):
    doc = {
        **TOUCH,
        "pressures": {"start": 0, "stop": "60kPa", "points": 61},
        "r2_min": 0.99,
        "search": {
            "objective": "max_sensitivity",
            "dimensions": [{"path": "geometry.radius", "lo": "3mm", "hi": "8mm", "steps": 6}],
            "constraints": [{"type": "linear_window_covers", "p_lo": "15kPa", "p_hi": "50kPa"}],
            "refine_iterations": 12,
        },
    }
    _, out = run(tmp_path, doc, "search")
    parsed = read_json(out / "search.json")
    best = parsed["report"]["best"]["geometry.radius"]
    assert 3e-3 <= best <= 8e-3
    rechecks = [r for r in parsed["rows"] if r[1] == "recheck"]
    assert rechecks[-1][4] == 1
    # the emitted config reproduces a qualifying linear window from scratch
    cfg_path = tmp_path / "best.json"
    cfg_path.write_text(json.dumps({k: v for k, v in parsed["report"]["config"].items() if k != "search"}))
    main(["touch-curve", "--config", str(cfg_path), "--out", str(tmp_path / "best")])
    window = read_json(tmp_path / "best" / "touch_curve.json")["report"]["linear_window_pa"]
    assert window[0] <= 15e3 and window[1] >= 50e3
    grid_best = max((r[3] for r in parsed["rows"] if r[1] == "grid" and r[4] == 1), default=None)
    assert parsed["report"]["best_objective"] >= grid_best


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "capsense.cli", "spl", "--value", "1", "--direction", "to_db", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert read_json(tmp_path / "spl.json")["report"]["output"] == pytest.approx(93.9794, abs=1e-4)
