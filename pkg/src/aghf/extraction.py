"""Control extraction from a converged path, forward integration, and the error bound."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import (
    BoundPreconditionError,
    DimensionError,
    IntegrationDivergedError,
    SingularFrameError,
)
from .flow import FlowConfig, FlowResult, solve_aghf
from .lagrangian import HomotopyPath, action
from .metric import MetricField
from .systems import ControlSystem, PlanningProblem, eval_dynamics

Array = np.ndarray


@dataclass(frozen=True)
class DenseTrajectory:
    """Forward-integrated trajectory sampled at grid times plus substeps."""

    times: Array
    states: Array

    @property
    def final_state(self) -> Array:
        return self.states[-1]


@dataclass(frozen=True)
class TheoremBound:
    """Closed-form endpoint-error bound sqrt(3TMC/lam) exp(1.5T (Ld^2 T + Lc^2 C)).

    In the exponent the drift Lipschitz constant multiplies T (a state
    difference integrates over plain time) while the control-matrix constant
    multiplies C (its error term is weighted by the control energy).
    """

    C: float
    M: float
    L_drift: float
    L_control: float
    T: float
    lam: float
    value: float
    c_is_surrogate: bool = False


@dataclass(frozen=True)
class PlanSolution:
    """Everything extracted from a converged flow: controls, integrated path, errors."""

    path: HomotopyPath
    controls_u: Array
    controls_uc: Array
    integrated_path: DenseTrajectory
    endpoint_error: float
    energy_u: float
    energy_uc: float
    bound: Optional[TheoremBound] = None


def extract_controls(mf: MetricField, path: HomotopyPath) -> Tuple[Array, Array]:
    """Split Fbar^-1 (xdot - F_d) into (controls_u, controls_uc) at every node."""
    sys = mf.system
    X = path.states
    w = path.velocity() - sys.drift_at(X)
    Fbar = mf.frame_at(X)
    try:
        full = np.linalg.solve(Fbar, w[..., None])[..., 0]
    except np.linalg.LinAlgError:
        conds = np.linalg.cond(Fbar)
        node = int(np.argmax(np.where(np.isfinite(conds), conds, np.inf)))
        raise SingularFrameError(
            f"frame singular at node {node} (t={path.times[node]:.6g})", node=node
        ) from None
    n_c = sys.n - sys.m
    return full[:, n_c:], full[:, :n_c]


def integrate_path(
    sys: ControlSystem, controls_u: Array, x_i: Array, T: float, substeps: int = 10
) -> DenseTrajectory:
    """Integrate xdot = F_d(x) + F(x) u(t) with classical RK4 and dense substeps.

    Controls are interpolated linearly in t between grid nodes; ``substeps``
    fixed RK4 steps are taken per grid interval (at least 10).
    """
    controls_u = np.asarray(controls_u, dtype=float)
    if controls_u.ndim != 2 or controls_u.shape[1] != sys.m:
        raise DimensionError(f"controls must be (N, {sys.m})")
    substeps = max(int(substeps), 10)
    n_t = controls_u.shape[0]
    grid = np.linspace(0.0, float(T), n_t)
    dt = grid[1] - grid[0]
    h = dt / substeps

    times = [0.0]
    states = [np.asarray(x_i, dtype=float).copy()]
    x = states[0]
    # blow-ups surface as the divergence error below, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_t - 1):
            u0, u1 = controls_u[k], controls_u[k + 1]
            for j in range(substeps):
                t_loc = j * h

                def u_of(tau):
                    return u0 + ((t_loc + tau) / dt) * (u1 - u0)

                k1 = eval_dynamics(sys, x, u_of(0.0))
                k2 = eval_dynamics(sys, x + 0.5 * h * k1, u_of(0.5 * h))
                k3 = eval_dynamics(sys, x + 0.5 * h * k2, u_of(0.5 * h))
                k4 = eval_dynamics(sys, x + h * k3, u_of(h))
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t = grid[k] + (j + 1) * h
                if not np.all(np.isfinite(x)):
                    raise IntegrationDivergedError(
                        f"state became non-finite at t={t:.6g}", t=float(t)
                    )
                times.append(float(t))
                states.append(x)
    return DenseTrajectory(times=np.array(times), states=np.stack(states))


def endpoint_error(sol: PlanSolution, x_f: Array) -> float:
    """Euclidean distance between the integrated endpoint and the target."""
    return float(np.linalg.norm(sol.integrated_path.final_state - np.asarray(x_f, dtype=float)))


def frame_completion_bound(mf: MetricField, path: HomotopyPath) -> float:
    """Largest eigenvalue of F_c^T F_c over the path nodes."""
    n_c = mf.system.n - mf.system.m
    if n_c == 0:
        return 0.0
    Fc = mf.frame_at(path.states)[..., :n_c]
    sv = np.linalg.svd(Fc, compute_uv=False)
    return float(np.max(sv) ** 2)


def theorem_bound(
    mf: MetricField,
    path: HomotopyPath,
    *,
    T: float,
    lam: float,
    L_drift: float,
    L_control: float,
    C: Optional[float] = None,
    M: Optional[float] = None,
) -> TheoremBound:
    """Evaluate the endpoint-error bound for a converged path.

    C must dominate twice the (1/2-convention) action of the path and M the
    largest eigenvalue of F_c^T F_c along it; both default to measured values
    with small safety margins, flagged as surrogates.
    """
    measured_c = 2.0 * action(mf, path)
    measured_m = frame_completion_bound(mf, path)
    c_is_surrogate = C is None
    if C is None:
        C = measured_c * (1.0 + 1e-6)
    if M is None:
        M = measured_m * 1.1
    if C < measured_c * (1.0 - 1e-12):
        raise BoundPreconditionError(
            f"C={C:.6g} is below the measured action bound {measured_c:.6g}"
        )
    if M < measured_m * (1.0 - 1e-12):
        raise BoundPreconditionError(
            f"M={M:.6g} is below the measured frame bound {measured_m:.6g}"
        )
    with np.errstate(over="ignore"):  # inf is a valid (vacuous) bound
        value = float(
            np.sqrt(3.0 * T * M * C / lam)
            * np.exp(1.5 * T * (L_drift**2 * T + L_control**2 * C))
        )
    return TheoremBound(
        C=float(C),
        M=float(M),
        L_drift=float(L_drift),
        L_control=float(L_control),
        T=float(T),
        lam=float(lam),
        value=value,
        c_is_surrogate=c_is_surrogate,
    )


def extract_plan(
    problem: PlanningProblem,
    mf: MetricField,
    flow_result: FlowResult,
    substeps: int = 10,
    with_bound: bool = True,
) -> PlanSolution:
    """Extraction + forward integration + bound evaluation for a finished flow."""
    path = flow_result.final_path
    u, uc = extract_controls(mf, path)
    traj = integrate_path(problem.system, u, problem.x_i, problem.horizon_T, substeps)
    dt = path.dt
    energy_u = float(np.trapezoid(np.sum(u**2, axis=1), dx=dt))
    energy_uc = float(np.trapezoid(np.sum(uc**2, axis=1), dx=dt)) if uc.size else 0.0
    bound = None
    if with_bound:
        bound = theorem_bound(
            mf,
            path,
            T=problem.horizon_T,
            lam=problem.lam,
            L_drift=problem.system.lipschitz_drift,
            L_control=problem.system.lipschitz_control,
        )
    err = float(np.linalg.norm(traj.final_state - problem.x_f))
    return PlanSolution(
        path=path,
        controls_u=u,
        controls_uc=uc,
        integrated_path=traj,
        endpoint_error=err,
        energy_u=energy_u,
        energy_uc=energy_uc,
        bound=bound,
    )


def plan(
    problem: PlanningProblem,
    mf: MetricField,
    cfg: FlowConfig,
    snapshot_s=None,
    substeps: int = 10,
    with_bound: bool = True,
) -> Tuple[FlowResult, PlanSolution]:
    """Full pipeline: flow to (near-)steady state, then extract and verify."""
    flow_result = solve_aghf(problem, mf, cfg, snapshot_s=snapshot_s)
    sol = extract_plan(problem, mf, flow_result, substeps=substeps, with_bound=with_bound)
    return flow_result, sol
