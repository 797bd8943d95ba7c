"""Run configuration: YAML schema, sketch construction, validation, problem building."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import yaml

from .constraints import AugmentedProblem, BarrierSpec, augment, input_magnitude_bounds
from .errors import ConfigError, ConstraintViolationError, UnknownSystemError
from .flow import FlowConfig, StepControl
from .metric import MetricField, default_metric
from .systems import ControlSystem, PlanningProblem, builtin_system

Array = np.ndarray

SKETCH_KINDS = ("straight_line", "sinusoid_x", "waypoints")


def straight_line_sketch(x_i: Array, x_f: Array, horizon_T: float) -> Callable:
    x_i = np.asarray(x_i, dtype=float)
    x_f = np.asarray(x_f, dtype=float)

    def sketch(t):
        return x_i + (t / horizon_T) * (x_f - x_i)

    return sketch


def sinusoid_sketch(
    x_i: Array, x_f: Array, horizon_T: float, amplitude: float = 1.0, axis: int = 0
) -> Callable:
    """Straight-line interpolation plus a full sine period on one coordinate."""
    base = straight_line_sketch(x_i, x_f, horizon_T)
    e = np.zeros(len(np.asarray(x_i)))
    e[axis] = 1.0

    def sketch(t):
        return base(t) + amplitude * np.sin(2.0 * np.pi * t / horizon_T) * e

    return sketch


def waypoint_sketch(points, horizon_T: float) -> Callable:
    """Piecewise-linear interpolation through rows [t, x_1, ..., x_n]."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 2:
        raise ConfigError("waypoints must be a list of [t, x...] rows, at least two")
    ts = pts[:, 0]
    if np.any(np.diff(ts) <= 0.0):
        raise ConfigError("waypoint times must be strictly increasing")
    if abs(ts[0]) > 1e-12 or abs(ts[-1] - horizon_T) > 1e-12:
        raise ConfigError("waypoints must start at t=0 and end at t=T")

    def sketch(t):
        return np.array([np.interp(t, ts, pts[:, 1 + k]) for k in range(pts.shape[1] - 1)])

    return sketch


@dataclass(frozen=True)
class RunConfig:
    """One planning run: system, boundary data, sketch, flow knobs, outputs."""

    name: str
    system: Union[str, ControlSystem]
    x_i: Array
    x_f: Array
    horizon_T: float
    lam: float
    sketch_kind: str = "straight_line"
    sketch_options: dict = field(default_factory=dict)
    flow: FlowConfig = field(default_factory=FlowConfig)
    augment_u_i: Optional[Array] = None
    augment_u_f: Optional[Array] = None
    barrier_form: str = "reciprocal_quadratic"
    barrier_u_max: Optional[dict] = None
    output_dir: str = "runs/out"
    snapshot_count: int = 10
    integration_substeps: int = 10

    @property
    def augmented(self) -> bool:
        return self.augment_u_i is not None


@dataclass(frozen=True)
class BuiltProblem:
    """Everything the pipeline needs, assembled from a validated RunConfig."""

    config: RunConfig
    problem: PlanningProblem
    metric: MetricField
    system: ControlSystem  # the system the flow runs on (augmented if applicable)
    augmentation: Optional[AugmentedProblem]
    barrier: Optional[BarrierSpec]


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing key {key!r} in {context}")
    return mapping[key]


def _check_keys(mapping: dict, allowed, context: str):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {context}")


def parse_config(raw: dict, name_hint: str = "config") -> RunConfig:
    """Validate a parsed YAML mapping into a RunConfig (schema errors only)."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(
        raw,
        {"name", "system", "problem", "sketch", "flow", "augment", "barrier", "outputs"},
        "config",
    )
    name = raw.get("name", name_hint)
    system = _require(raw, "system", "config")

    prob = _require(raw, "problem", "config")
    _check_keys(prob, {"x_i", "x_f", "T", "lambda"}, "problem")
    x_i = np.asarray(_require(prob, "x_i", "problem"), dtype=float)
    x_f = np.asarray(_require(prob, "x_f", "problem"), dtype=float)
    horizon_T = float(_require(prob, "T", "problem"))
    lam = float(_require(prob, "lambda", "problem"))

    sketch = raw.get("sketch", {}) or {}
    _check_keys(sketch, {"kind", "amplitude", "axis", "waypoints"}, "sketch")
    sketch_kind = sketch.get("kind", "straight_line")
    if sketch_kind not in SKETCH_KINDS:
        raise ConfigError(f"unknown sketch kind {sketch_kind!r}; valid: {SKETCH_KINDS}")
    sketch_options = {k: v for k, v in sketch.items() if k != "kind"}

    flow_raw = dict(raw.get("flow", {}) or {})
    _check_keys(
        flow_raw,
        {
            "n_t",
            "s_max",
            "initial_ds",
            "ds_min",
            "ds_max",
            "rhs_form",
            "residual_tol",
            "action_log_stride",
            "controller",
            "stepper",
        },
        "flow",
    )
    ctrl_raw = dict(flow_raw.pop("controller", {}) or {})
    _check_keys(ctrl_raw, {"rtol", "atol", "safety", "max_growth", "min_shrink"}, "controller")
    try:
        controller = StepControl(**{k: float(v) for k, v in ctrl_raw.items()})
        if "n_t" in flow_raw:
            flow_raw["n_t"] = int(flow_raw["n_t"])
        if "action_log_stride" in flow_raw:
            flow_raw["action_log_stride"] = int(flow_raw["action_log_stride"])
        for key in ("s_max", "initial_ds", "ds_min", "ds_max", "residual_tol"):
            if key in flow_raw and flow_raw[key] is not None:
                flow_raw[key] = float(flow_raw[key])
        flow = FlowConfig(controller=controller, **flow_raw)
    except TypeError as exc:
        raise ConfigError(f"bad flow section: {exc}") from None

    augment_u_i = augment_u_f = None
    if "augment" in raw and raw["augment"] is not None:
        aug = raw["augment"]
        _check_keys(aug, {"u_i", "u_f"}, "augment")
        augment_u_i = np.asarray(_require(aug, "u_i", "augment"), dtype=float)
        augment_u_f = np.asarray(_require(aug, "u_f", "augment"), dtype=float)

    barrier_form = "reciprocal_quadratic"
    barrier_u_max = None
    if "barrier" in raw and raw["barrier"] is not None:
        bar = raw["barrier"]
        _check_keys(bar, {"form", "u_max"}, "barrier")
        barrier_form = bar.get("form", "reciprocal_quadratic")
        barrier_u_max = {int(k): float(v) for k, v in _require(bar, "u_max", "barrier").items()}

    outputs = raw.get("outputs", {}) or {}
    _check_keys(outputs, {"dir", "snapshot_count", "integration_substeps"}, "outputs")

    return RunConfig(
        name=str(name),
        system=system,
        x_i=x_i,
        x_f=x_f,
        horizon_T=horizon_T,
        lam=lam,
        sketch_kind=sketch_kind,
        sketch_options=sketch_options,
        flow=flow,
        augment_u_i=augment_u_i,
        augment_u_f=augment_u_f,
        barrier_form=barrier_form,
        barrier_u_max=barrier_u_max,
        output_dir=str(outputs.get("dir", f"runs/{name}")),
        snapshot_count=int(outputs.get("snapshot_count", 10)),
        integration_substeps=int(outputs.get("integration_substeps", 10)),
    )


def load_config(path) -> RunConfig:
    """Parse a YAML config file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(raw, name_hint=path.stem)


def make_sketch(rc: RunConfig, x_i: Array, x_f: Array) -> Callable:
    opts = rc.sketch_options
    if rc.sketch_kind == "straight_line":
        return straight_line_sketch(x_i, x_f, rc.horizon_T)
    if rc.sketch_kind == "sinusoid_x":
        return sinusoid_sketch(
            x_i,
            x_f,
            rc.horizon_T,
            amplitude=float(opts.get("amplitude", 1.0)),
            axis=int(opts.get("axis", 0)),
        )
    return waypoint_sketch(opts.get("waypoints"), rc.horizon_T)


def build_problem(rc: RunConfig) -> BuiltProblem:
    """Resolve the system, augmentation, barrier, metric, and planning problem.

    Raises ConfigError for schema/shape trouble and ConstraintViolationError
    when the sketch is infeasible for the configured barrier.
    """
    if isinstance(rc.system, ControlSystem):
        base = rc.system
    else:
        try:
            base = builtin_system(str(rc.system))
        except UnknownSystemError as exc:
            raise ConfigError(str(exc)) from None

    if rc.x_i.shape != (base.n,) or rc.x_f.shape != (base.n,):
        raise ConfigError(
            f"x_i/x_f must have shape ({base.n},) for system {base.name!r}"
        )
    if rc.barrier_u_max and not rc.augmented:
        raise ConfigError("barrier input bounds require an augment section")

    barrier = None
    augmentation = None
    if rc.augmented:
        if rc.augment_u_i.shape != (base.m,) or rc.augment_u_f.shape != (base.m,):
            raise ConfigError(f"augment u_i/u_f must have shape ({base.m},)")
        if rc.barrier_u_max:
            barrier = input_magnitude_bounds(
                rc.barrier_u_max, n_base=base.n, m=base.m, form=rc.barrier_form
            )
        augmentation = augment(base, (rc.augment_u_i, rc.augment_u_f), barrier=barrier)
        system = augmentation.augmented
        x_i = augmentation.lift_state(rc.x_i, rc.augment_u_i)
        x_f = augmentation.lift_state(rc.x_f, rc.augment_u_f)
        base_sketch = make_sketch(rc, rc.x_i, rc.x_f)
        sketch = augmentation.lift_sketch(base_sketch, rc.horizon_T)
        completion = augmentation.completion
    else:
        system = base
        x_i, x_f = rc.x_i, rc.x_f
        sketch = make_sketch(rc, x_i, x_f)
        completion = None

    metric = default_metric(system, rc.lam, barrier=barrier, completion=completion)
    problem = PlanningProblem(
        system=system,
        x_i=x_i,
        x_f=x_f,
        horizon_T=rc.horizon_T,
        lam=rc.lam,
        initial_sketch=sketch,
    )

    if barrier is not None:
        times = np.linspace(0.0, rc.horizon_T, rc.flow.n_t)
        nodes = np.stack([sketch(t) for t in times])
        slack = barrier.min_slack(nodes)
        if slack <= barrier.floor:
            raise ConstraintViolationError(
                f"initial sketch violates a barrier constraint (min slack {slack:.3e})"
            )
    return BuiltProblem(
        config=rc,
        problem=problem,
        metric=metric,
        system=system,
        augmentation=augmentation,
        barrier=barrier,
    )


def snapshot_targets(rc: RunConfig) -> list:
    """s values to snapshot: the sketch plus geometrically spaced values up to s_max."""
    if rc.snapshot_count <= 0:
        return []
    s_max = rc.flow.s_max
    if rc.snapshot_count == 1:
        return [0.0, s_max]
    geo = np.geomspace(s_max * 1e-3, s_max, rc.snapshot_count)
    return [0.0] + [float(s) for s in geo]
