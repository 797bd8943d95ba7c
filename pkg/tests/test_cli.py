import json
import math
from pathlib import Path

import yaml

from aghf.cli import main

MINI_CONFIG = {
    "name": "mini",
    "system": "constant_velocity_unicycle",
    "problem": {"x_i": [0.0, 0.0, 0.0], "x_f": [0.5, 0.2, 0.0], "T": 1.0, "lambda": 50.0},
    "sketch": {"kind": "straight_line"},
    "flow": {"n_t": 21, "s_max": 0.5, "action_log_stride": 5},
    "outputs": {"snapshot_count": 3},
}


def write_config(tmp_path, overrides=None, name="mini.yaml"):
    raw = json.loads(json.dumps(MINI_CONFIG))
    if overrides:
        for key, val in overrides.items():
            node = raw
            parts = key.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = val
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def parse_csv(path: Path):
    lines = path.read_text().split("\n")
    assert lines[-1] == ""  # trailing LF
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:-1]]
    assert all(len(r) == len(header) for r in rows)
    return header, rows


def assert_csv_numeric_and_finite(path: Path):
    header, rows = parse_csv(path)
    for row in rows:
        for cell in row:
            val = float(cell)
            assert math.isfinite(val)
    return header, rows


def test_validate_and_run_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["validate", str(cfg)]) == 0
    assert "OK" in capsys.readouterr().out

    outdir = tmp_path / "out"
    assert main(["run", str(cfg), "-o", str(outdir)]) == 0

    header, rows = assert_csv_numeric_and_finite(outdir / "flow_history.csv")
    assert header == ["s", "action", "residual_max", "step_accepted"]
    accepted = [(float(r[0]), float(r[1])) for r in rows if r[3] == "1"]
    assert len(accepted) >= 2
    actions = [a for _, a in accepted]
    assert all(b <= a + 1e-8 * actions[0] for a, b in zip(actions, actions[1:]))

    header, rows = assert_csv_numeric_and_finite(outdir / "path_final.csv")
    assert header == ["t", "x_1", "x_2", "x_3"]
    assert len(rows) == 21

    header, rows = assert_csv_numeric_and_finite(outdir / "controls.csv")
    assert header == ["t", "u_1", "uc_1", "uc_2"]

    header, rows = assert_csv_numeric_and_finite(outdir / "integrated.csv")
    assert header == ["t", "xtilde_1", "xtilde_2", "xtilde_3"]
    assert len(rows) == 21 * 10 - 9  # 10 substeps per interval

    snaps = sorted((outdir / "snapshots").glob("s_*.csv"))
    assert snaps
    for snap in snaps:
        assert_csv_numeric_and_finite(snap)

    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["config"]["problem"]["lambda"] == 50.0
    assert summary["config"]["flow"]["n_t"] == 21
    assert summary["system"] == {"name": "constant_velocity_unicycle", "n": 3, "m": 1}
    assert math.isfinite(summary["endpoint_error"])
    assert summary["bound"]["value"] >= summary["endpoint_error"]
    assert summary["action_final"] <= summary["action_initial"]


def test_exit_code_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"system": "hovercraft"})
    assert main(["run", str(cfg), "-o", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"

    cfg2 = write_config(tmp_path, {"flow.n_t": 2}, name="bad_grid.yaml")
    assert main(["validate", str(cfg2)]) == 2

    cfg3 = write_config(tmp_path, {"flow.bogus_knob": 1}, name="bad_key.yaml")
    assert main(["validate", str(cfg3)]) == 2


def test_exit_code_flow_stiffness(tmp_path, capsys):
    overrides = {
        # a forced huge fixed step gets rejected but cannot shrink below ds_min
        "flow.initial_ds": 1.0,
        "flow.ds_min": 0.9,
        "flow.ds_max": 1.0,
        "flow.stepper": "euler",
        "flow.controller": {"rtol": 1.0e-8},
    }
    cfg = write_config(tmp_path, overrides, name="stiff.yaml")
    assert main(["run", str(cfg), "-o", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "flow"


def test_exit_code_constraint_violation(tmp_path, capsys):
    overrides = {
        "system": "kinematic_unicycle",
        "problem.x_i": [0.0, 0.0, 0.0],
        "problem.x_f": [0.0, -0.5, 0.0],
        "augment": {"u_i": [3.0, 0.0], "u_f": [0.0, 0.0]},  # starts outside |u1| < 2
        "barrier": {"form": "reciprocal_quadratic", "u_max": {1: 2.0}},
    }
    cfg = write_config(tmp_path, overrides, name="infeasible.yaml")
    assert main(["run", str(cfg), "-o", str(tmp_path / "o")]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "constraint"


def test_bitwise_reproducibility(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", str(cfg), "-o", str(out1)]) == 0
    assert main(["run", str(cfg), "-o", str(out2)]) == 0
    for name in ("flow_history.csv", "path_final.csv", "controls.csv", "integrated.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    s1.pop("wall_time_s")
    s2.pop("wall_time_s")
    assert s1 == s2


def test_sweep_single_element_matches_run(tmp_path):
    cfg = write_config(tmp_path)
    run_out = tmp_path / "run_out"
    assert main(["run", str(cfg), "-o", str(run_out)]) == 0
    sweep_out = tmp_path / "sweep_out"
    assert main(["sweep", str(cfg), "--lambdas", "50", "-o", str(sweep_out)]) == 0

    header, rows = parse_csv(sweep_out / "sweep.csv")
    assert header == ["lambda", "endpoint_error", "action_final", "energy_uc", "bound", "converged", "error"]
    assert len(rows) == 1
    summary = json.loads((run_out / "summary.json").read_text())
    assert float(rows[0][1]) == summary["endpoint_error"]
    assert float(rows[0][2]) == summary["action_final"]
    # the per-lambda run directory carries the full artifact set
    lam_summary = json.loads((sweep_out / "lambda_50" / "summary.json").read_text())
    assert lam_summary["endpoint_error"] == summary["endpoint_error"]


def test_sweep_records_per_run_errors_and_continues(tmp_path):
    cfg = write_config(tmp_path)
    sweep_out = tmp_path / "s"
    assert main(["sweep", str(cfg), "--lambdas", "-5", "25", "-o", str(sweep_out)]) == 0
    header, rows = parse_csv(sweep_out / "sweep.csv")
    assert rows[0][-1] != ""  # failed row records its category
    assert rows[1][-1] == ""
    assert math.isfinite(float(rows[1][1]))


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    out = capsys.readouterr().out
    for name in ("constant_velocity_unicycle", "dynamic_unicycle", "kinematic_unicycle"):
        assert name in out


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("AGHF_OUTPUT_DIR", str(tmp_path / "envout"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "envout" / "mini" / "summary.json").exists()
