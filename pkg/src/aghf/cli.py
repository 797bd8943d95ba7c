"""Batch front-end: run a config, sweep lambda, validate configs, list systems.

Artifacts per run: flow_history.csv, path_final.csv, controls.csv,
integrated.csv, snapshots/s_<value>.csv, summary.json. CSV dialect:
comma-separated, '.' decimal, header row, LF line endings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from .config import BuiltProblem, RunConfig, build_problem, load_config, snapshot_targets
from .errors import (
    AghfError,
    ConfigError,
    ConstraintViolationError,
    DimensionError,
    IntegrationDivergedError,
    SingularFrameError,
    StiffnessError,
)
from .extraction import plan
from .systems import builtin_system, builtin_system_names

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_FLOW = 3
EXIT_CONSTRAINT = 4


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(cells) for cells in rows)
    path.write_text("\n".join(lines) + "\n")


def config_echo(rc: RunConfig) -> dict:
    """The normalized config mapping, embedded in summary.json for reproducibility."""
    echo = {
        "name": rc.name,
        "system": rc.system if isinstance(rc.system, str) else rc.system.name,
        "problem": {
            "x_i": [float(v) for v in rc.x_i],
            "x_f": [float(v) for v in rc.x_f],
            "T": rc.horizon_T,
            "lambda": rc.lam,
        },
        "sketch": {"kind": rc.sketch_kind, **rc.sketch_options},
        "flow": {
            "n_t": rc.flow.n_t,
            "s_max": rc.flow.s_max,
            "initial_ds": rc.flow.initial_ds,
            "ds_min": rc.flow.ds_min,
            "ds_max": rc.flow.ds_max,
            "rhs_form": rc.flow.rhs_form,
            "residual_tol": rc.flow.residual_tol,
            "action_log_stride": rc.flow.action_log_stride,
            "controller": asdict(rc.flow.controller),
        },
        "augment": None
        if not rc.augmented
        else {
            "u_i": [float(v) for v in rc.augment_u_i],
            "u_f": [float(v) for v in rc.augment_u_f],
        },
        "barrier": None
        if rc.barrier_u_max is None
        else {"form": rc.barrier_form, "u_max": {str(k): v for k, v in rc.barrier_u_max.items()}},
        "outputs": {
            "dir": rc.output_dir,
            "snapshot_count": rc.snapshot_count,
            "integration_substeps": rc.integration_substeps,
        },
    }
    return echo


def write_artifacts(outdir: Path, built: BuiltProblem, flow_result, sol, wall_time: float) -> dict:
    """Write the CSV/JSON artifact set for one finished run; returns the summary."""
    outdir.mkdir(parents=True, exist_ok=True)
    n, m = built.system.n, built.system.m
    n_c = n - m
    rc = built.config

    _write_csv(
        outdir / "flow_history.csv",
        ["s", "action", "residual_max", "step_accepted"],
        (
            [_fmt(s), _fmt(a), _fmt(r), str(int(ok))]
            for s, a, r, ok in flow_result.attempt_log
        ),
    )

    path = flow_result.final_path
    _write_csv(
        outdir / "path_final.csv",
        ["t"] + [f"x_{i + 1}" for i in range(n)],
        ([_fmt(t)] + [_fmt(v) for v in row] for t, row in zip(path.times, path.states)),
    )

    u, uc = sol.controls_u, sol.controls_uc
    _write_csv(
        outdir / "controls.csv",
        ["t"] + [f"u_{j + 1}" for j in range(m)] + [f"uc_{j + 1}" for j in range(n_c)],
        (
            [_fmt(t)] + [_fmt(v) for v in u_row] + [_fmt(v) for v in uc_row]
            for t, u_row, uc_row in zip(path.times, u, uc)
        ),
    )

    traj = sol.integrated_path
    _write_csv(
        outdir / "integrated.csv",
        ["t"] + [f"xtilde_{i + 1}" for i in range(n)],
        ([_fmt(t)] + [_fmt(v) for v in row] for t, row in zip(traj.times, traj.states)),
    )

    snaps = flow_result.snapshots or []
    if snaps:
        snapdir = outdir / "snapshots"
        snapdir.mkdir(exist_ok=True)
        seen = set()
        for s, snap in snaps:
            fname = f"s_{s:.6g}.csv"
            if fname in seen:
                continue
            seen.add(fname)
            _write_csv(
                snapdir / fname,
                ["t"] + [f"x_{i + 1}" for i in range(n)],
                (
                    [_fmt(t)] + [_fmt(v) for v in row]
                    for t, row in zip(snap.times, snap.states)
                ),
            )

    summary = {
        "name": rc.name,
        "system": {"name": built.system.name, "n": n, "m": m},
        "lambda": rc.lam,
        "T": rc.horizon_T,
        "n_t": rc.flow.n_t,
        "converged": bool(flow_result.converged),
        "steps_taken": flow_result.steps_taken,
        "steps_rejected": flow_result.steps_rejected,
        "endpoint_error": sol.endpoint_error,
        "action_initial": flow_result.action_initial,
        "action_final": flow_result.action_final,
        "residual_final": flow_result.residual_final,
        "energy_u": sol.energy_u,
        "energy_uc": sol.energy_uc,
        "bound": None if sol.bound is None else asdict(sol.bound),
        "wall_time_s": wall_time,
        "config": config_echo(rc),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def execute_run(rc: RunConfig, outdir: Path) -> dict:
    """Build, flow, extract, verify, and write artifacts for one config."""
    built = build_problem(rc)
    t0 = time.perf_counter()
    flow_result, sol = plan(
        built.problem,
        built.metric,
        rc.flow,
        snapshot_s=snapshot_targets(rc),
        substeps=rc.integration_substeps,
    )
    wall = time.perf_counter() - t0
    return write_artifacts(outdir, built, flow_result, sol, wall)


def _error_category(exc: Exception):
    if isinstance(exc, (ConfigError, DimensionError)):
        return "config", EXIT_CONFIG
    if isinstance(exc, ConstraintViolationError):
        return "constraint", EXIT_CONSTRAINT
    if isinstance(exc, (StiffnessError, SingularFrameError, IntegrationDivergedError)):
        return "flow", EXIT_FLOW
    return "internal", EXIT_INTERNAL


def _fail(exc: Exception) -> int:
    category, code = _error_category(exc)
    print(json.dumps({"error": category, "message": str(exc)}), file=sys.stderr)
    return code


def _resolve_outdir(rc: RunConfig, override) -> Path:
    if override:
        return Path(override)
    env = os.environ.get("AGHF_OUTPUT_DIR")
    if env:
        return Path(env) / rc.name
    return Path(rc.output_dir)


def _sweep_worker(payload):
    rc, lam, outdir = payload
    rc = replace(rc, lam=lam, output_dir=str(outdir))
    try:
        summary = execute_run(rc, Path(outdir))
    except AghfError as exc:
        category, _ = _error_category(exc)
        return {"lambda": lam, "error": category, "message": str(exc)}
    bound = summary["bound"]["value"] if summary["bound"] else ""
    return {
        "lambda": lam,
        "endpoint_error": summary["endpoint_error"],
        "action_final": summary["action_final"],
        "energy_uc": summary["energy_uc"],
        "bound": bound,
        "converged": summary["converged"],
        "error": "",
    }


def sweep_runs(rc: RunConfig, lambdas, outdir: Path, jobs: int = 1):
    """Run the pipeline once per lambda; failures are recorded and the sweep continues."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payloads = [(rc, float(lam), str(outdir / f"lambda_{lam:g}")) for lam in lambdas]
    if jobs > 1 and isinstance(rc.system, str):
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, payloads))
    else:
        rows = [_sweep_worker(p) for p in payloads]

    csv_rows = []
    for row in rows:
        if row.get("error"):
            csv_rows.append(
                [_fmt(row["lambda"]), "", "", "", "", "", row["error"]]
            )
        else:
            csv_rows.append(
                [
                    _fmt(row["lambda"]),
                    _fmt(row["endpoint_error"]),
                    _fmt(row["action_final"]),
                    _fmt(row["energy_uc"]),
                    _fmt(row["bound"]) if row["bound"] != "" else "",
                    str(int(row["converged"])),
                    "",
                ]
            )
    _write_csv(
        outdir / "sweep.csv",
        ["lambda", "endpoint_error", "action_final", "energy_uc", "bound", "converged", "error"],
        csv_rows,
    )
    return rows


# subcommands ------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        rc = load_config(args.config)
        outdir = _resolve_outdir(rc, args.output)
        summary = execute_run(rc, outdir)
    except AghfError as exc:
        return _fail(exc)
    print(
        f"{rc.name}: converged={summary['converged']} "
        f"endpoint_error={summary['endpoint_error']:.6g} "
        f"action {summary['action_initial']:.6g} -> {summary['action_final']:.6g} "
        f"({outdir})"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        rc = load_config(args.config)
        outdir = _resolve_outdir(rc, args.output)
        rows = sweep_runs(rc, args.lambdas, outdir, jobs=args.jobs)
    except AghfError as exc:
        return _fail(exc)
    for row in rows:
        if row.get("error"):
            print(f"lambda={row['lambda']:g}: ERROR ({row['error']}) {row['message']}")
        else:
            print(
                f"lambda={row['lambda']:g}: endpoint_error={row['endpoint_error']:.6g} "
                f"converged={row['converged']}"
            )
    print(f"sweep table: {Path(outdir) / 'sweep.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        rc = load_config(args.config)
        built = build_problem(rc)
    except AghfError as exc:
        return _fail(exc)
    sys_ = built.system
    print(
        f"OK: {rc.name} (system {sys_.name}, n={sys_.n}, m={sys_.m}, "
        f"n_t={rc.flow.n_t}, s_max={rc.flow.s_max:g}, lambda={rc.lam:g})"
    )
    return EXIT_OK


def cmd_list_systems(args) -> int:
    for name in builtin_system_names():
        system = builtin_system(name)
        print(f"{name}: n={system.n}, m={system.m}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aghf",
        description="Motion planning by deforming a sketch with the affine geometric heat flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one planning config, write artifacts")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output", help="output directory (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the config once per lambda")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--lambdas", nargs="+", type=float, required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("-o", "--output", help="output directory (overrides config)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="validate a config without running it")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_list = sub.add_parser("list-systems", help="list builtin systems")
    p_list.set_defaults(func=cmd_list_systems)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
