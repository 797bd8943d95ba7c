"""Method-of-lines integration of the affine geometric heat flow in the homotopy parameter.

The flow dx/ds = G^-1 (d/dt dL/dxdot - dL/dx) is stepped explicitly with
step-doubling error control; a step is accepted only if the discrete action
did not increase (beyond roundoff slack) and the local error estimate passed.
The covariant formulation (curve-straightening term plus the drift-alignment
forcing) is kept as a cross-check oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    ConfigError,
    ConstraintViolationError,
    SingularFrameError,
    StiffnessError,
)
from .lagrangian import (
    CurvePoint,
    HomotopyPath,
    el_residual_terms,
    lagrangian_along,
    path_acceleration,
    path_velocity,
)
from .metric import MetricField
from .systems import PlanningProblem

Array = np.ndarray

ACTION_SLACK = 1e-8  # relative to the initial action


@dataclass(frozen=True)
class StepControl:
    """Parameters of the step-doubling controller."""

    rtol: float = 1e-3
    atol: float = 1e-9
    safety: float = 0.9
    max_growth: float = 2.0
    min_shrink: float = 0.2


@dataclass(frozen=True)
class FlowConfig:
    """Grid size, s-range, step bounds, and stopping rule for one flow run."""

    n_t: int = 101
    s_max: float = 1.0
    initial_ds: float = 1e-6
    ds_min: float = 1e-14
    ds_max: float = 1.0
    rhs_form: str = "euler_lagrange"
    residual_tol: Optional[float] = None  # default: 1e-3 x initial residual
    action_log_stride: int = 1
    controller: StepControl = field(default_factory=StepControl)
    stepper: str = "chebyshev"

    def __post_init__(self):
        if self.n_t < 5:
            raise ConfigError("n_t must be at least 5")
        if not (0.0 < self.ds_min <= self.initial_ds <= self.ds_max):
            raise ConfigError("need 0 < ds_min <= initial_ds <= ds_max")
        if not self.s_max > 0.0:
            raise ConfigError("s_max must be positive")
        if self.rhs_form not in ("euler_lagrange", "covariant"):
            raise ConfigError(f"unknown rhs_form {self.rhs_form!r}")
        if self.action_log_stride < 1:
            raise ConfigError("action_log_stride must be >= 1")
        if self.stepper not in ("chebyshev", "euler"):
            raise ConfigError(f"unknown stepper {self.stepper!r}")


@dataclass
class FlowResult:
    """Converged (or truncated) flow output with action and residual histories."""

    final_path: HomotopyPath
    action_history: List[Tuple[float, float]]
    residual_history: List[Tuple[float, float]]
    snapshots: Optional[List[Tuple[float, HomotopyPath]]]
    steps_taken: int
    steps_rejected: int
    converged: bool
    attempt_log: List[Tuple[float, float, float, bool]] = field(default_factory=list)
    rejection_reasons: dict = field(default_factory=dict)

    @property
    def action_initial(self) -> float:
        return self.action_history[0][1]

    @property
    def action_final(self) -> float:
        return self.action_history[-1][1]

    @property
    def residual_final(self) -> float:
        return self.residual_history[-1][1]


# RHS assembly ----------------------------------------------------------


def _solve_metric(mf: MetricField, Xi: Array, G: Array, res: Array) -> Array:
    G0inv = mf.cached_base_inverse()
    if G0inv is None:
        return np.linalg.solve(G, res[..., None])[..., 0]
    if mf.barrier is None:
        return res @ G0inv
    b = mf.barrier.value_at(Xi)
    return (res @ G0inv) / b[..., None]


def aghf_rhs_el(mf: MetricField, path: HomotopyPath) -> Array:
    """dx/ds = G^-1 (d/dt dL/dxdot - dL/dx) at every node; endpoint rows are zero."""
    return _rhs_el_states(mf, path.states, path.dt)


def _rhs_el_states(mf: MetricField, X: Array, dt: float) -> Array:
    V = path_velocity(X, dt)
    A = path_acceleration(X, dt)
    Xi, Vi, Ai = X[1:-1], V[1:-1], A[1:-1]
    G, dG = mf.G_and_derivs_at(Xi)
    f = mf.system.drift_at(Xi)
    Jf = mf.system.drift_jacobian_at(Xi)
    res = el_residual_terms(G, dG, f, Jf, Vi, Ai)
    out = np.zeros_like(X)
    out[1:-1] = _solve_metric(mf, Xi, G, res)
    return out


def _rhs_covariant_batch(mf: MetricField, Xi: Array, Vi: Array, Ai: Array) -> Array:
    G, dG = mf.G_and_derivs_at(Xi)
    f = mf.system.drift_at(Xi)
    Jf = mf.system.drift_jacobian_at(Xi)
    w = Vi - f
    out = Ai - np.einsum("...ij,...j->...i", Jf, Vi)
    Gw = np.einsum("...ij,...j->...i", G, w)
    forcing = np.einsum("...ji,...j->...i", Jf, Gw)
    if dG is not None:
        Gamma = mf.christoffel_at(Xi)
        out = out + np.einsum("...kij,...i,...j->...k", Gamma, Vi, w)
        forcing = forcing + 0.5 * np.einsum("...i,...kij,...j->...k", w, dG, f)
    out = out + _solve_metric(mf, Xi, G, forcing)
    return out


def aghf_rhs_covariant(mf: MetricField, p: CurvePoint) -> Array:
    """Covariant-form flow velocity at one curve point (needs xddot)."""
    if p.xddot is None:
        raise ConfigError("aghf_rhs_covariant needs xddot on the curve point")
    return _rhs_covariant_batch(
        mf, p.x[None, :], p.xdot[None, :], p.xddot[None, :]
    )[0]


def _rhs_covariant_states(mf: MetricField, X: Array, dt: float) -> Array:
    V = path_velocity(X, dt)
    A = path_acceleration(X, dt)
    out = np.zeros_like(X)
    out[1:-1] = _rhs_covariant_batch(mf, X[1:-1], V[1:-1], A[1:-1])
    return out


_RHS = {
    "euler_lagrange": _rhs_el_states,
    "covariant": _rhs_covariant_states,
}


# time stepping in s ----------------------------------------------------

# Damped first-order Chebyshev super-steps: stage count q extends the explicit
# stability interval from 2 to roughly 2 q^2 along the negative real axis,
# which is what a stiff parabolic method-of-lines system needs. q = 1 reduces
# to forward Euler.

CHEB_DAMPING = 0.05
MAX_STAGES = 64

_cheb_cache: dict = {}


def _chebyshev_tables(q: int):
    """T_j(w0) and T_j'(w0) for j = 0..q at the damped anchor w0."""
    w0 = 1.0 + CHEB_DAMPING / q**2
    T = [1.0, w0]
    dT = [0.0, 1.0]
    for j in range(2, q + 1):
        T.append(2.0 * w0 * T[-1] - T[-2])
        dT.append(2.0 * T[j - 1] + 2.0 * w0 * dT[-1] - dT[-2])
    return w0, T, dT


def _chebyshev_coeffs(q: int):
    """Recursion weights (beta, mu_1, [mu_j], [nu_j], [mutilde_j]) for q stages."""
    if q in _cheb_cache:
        return _cheb_cache[q]
    w0, T, dT = _chebyshev_tables(q)
    w1 = T[q] / dT[q]
    beta = (1.0 + w0) / w1  # exact negative-real stability boundary
    mu1 = w1 / w0
    mus, nus, muts = [], [], []
    for j in range(2, q + 1):
        mus.append(2.0 * w0 * T[j - 1] / T[j])
        nus.append(-T[j - 2] / T[j])
        muts.append(2.0 * w1 * T[j - 1] / T[j])
    out = (beta, mu1, mus, nus, muts)
    _cheb_cache[q] = out
    return out


def _chebyshev_step(rhs_fn, X: Array, ds: float, q: int, F0: Array) -> Array:
    """One q-stage Chebyshev super-step of size ds from X, reusing F0 = rhs(X)."""
    if q == 1:
        return X + ds * F0
    _, mu1, mus, nus, muts = _chebyshev_coeffs(q)
    Y_prev = X
    Y = X + mu1 * ds * F0
    for j in range(q - 1):
        Y_next = mus[j] * Y + nus[j] * Y_prev + muts[j] * ds * rhs_fn(Y)
        Y_prev, Y = Y, Y_next
    return Y


def _stages_for(z: float) -> int:
    """Smallest stage count whose stability interval covers z = ds * rho."""
    for q in range(1, MAX_STAGES + 1):
        if _chebyshev_coeffs(q)[0] >= z:
            return q
    return MAX_STAGES


def _estimate_rho(rhs_fn, X: Array, F0: Array, iters: int = 8) -> float:
    """Spectral radius of the flow Jacobian by deterministic power iteration.

    Seeded with the sawtooth mode, the stiffest direction of the second
    difference; interior rows only (endpoints are pinned).
    """
    v = np.zeros_like(X)
    v[1:-1] = ((-1.0) ** np.arange(1, X.shape[0] - 1))[:, None]
    v /= np.linalg.norm(v)
    scale = max(1.0, float(np.max(np.abs(X))))
    eps = 1e-7 * scale
    rho = 0.0
    for _ in range(iters):
        Fv = (rhs_fn(X + eps * v) - F0) / eps
        norm = np.linalg.norm(Fv)
        if norm == 0.0 or not np.isfinite(norm):
            break
        rho = norm
        v = Fv / norm
    return 1.2 * rho + 1.0


def solve_aghf(
    problem: PlanningProblem,
    mf: MetricField,
    cfg: FlowConfig,
    snapshot_s: Optional[List[float]] = None,
) -> FlowResult:
    """Deform the initial sketch toward a steady state of the flow.

    Steps explicitly in s with step-doubling error control; acceptance
    additionally requires the action not to increase by more than 1e-8
    relative to the initial action, and every barrier constraint (if any)
    to stay strictly feasible along the candidate path.
    """
    rhs = _RHS[cfg.rhs_form]
    path0 = HomotopyPath.from_sketch(
        problem.initial_sketch, problem.x_i, problem.x_f, problem.horizon_T, cfg.n_t
    )
    X = path0.states.copy()
    dt = path0.dt

    def make_path(states: Array) -> HomotopyPath:
        return path0.with_states(states.copy())

    def action_of(states: Array) -> float:
        return float(
            np.trapezoid(lagrangian_along(mf, states, path_velocity(states, dt)), dx=dt)
        )

    r_cur = rhs(mf, X, dt)  # errors at the sketch itself propagate
    res_cur = float(np.max(np.abs(r_cur)))
    a_cur = action_of(X)
    a_init = a_cur
    slack = ACTION_SLACK * max(abs(a_init), 1e-300)

    residual_tol = cfg.residual_tol
    if residual_tol is None:
        # 1e-12 floor: a sketch whose residual is pure roundoff is a fixed point
        residual_tol = max(1e-3 * res_cur, 1e-12)

    action_history = [(0.0, a_cur)]
    residual_history = [(0.0, res_cur)]
    attempt_log = [(0.0, a_cur, res_cur, True)]

    targets = sorted(snapshot_s) if snapshot_s else []
    snapshots: List[Tuple[float, HomotopyPath]] = []
    s = 0.0
    while targets and targets[0] <= s:
        snapshots.append((s, make_path(X)))
        targets.pop(0)

    if res_cur <= residual_tol:
        return FlowResult(
            final_path=make_path(X),
            action_history=action_history,
            residual_history=residual_history,
            snapshots=snapshots or None,
            steps_taken=0,
            steps_rejected=0,
            converged=True,
            attempt_log=attempt_log,
        )

    ctrl = cfg.controller
    ds = cfg.initial_ds
    steps_taken = 0
    steps_rejected = 0
    rejection_reasons: dict = {}
    converged = False

    def rhs_states(states):
        return rhs(mf, states, dt)

    use_cheb = cfg.stepper == "chebyshev"
    rho = 0.0
    rho_age = 0
    if use_cheb:
        try:
            rho = _estimate_rho(rhs_states, X, r_cur)
        except ConstraintViolationError:
            rho = 0.0

    while s < cfg.s_max * (1.0 - 1e-15):
        ds_try = min(ds, cfg.ds_max, cfg.s_max - s)
        if use_cheb:
            z_cap = _chebyshev_coeffs(MAX_STAGES)[0]
            if ds_try * rho > z_cap:
                ds_try = z_cap / rho
            q_full = _stages_for(1.05 * ds_try * rho)
            q_half = _stages_for(1.05 * 0.5 * ds_try * rho)
        else:
            q_full = q_half = 1
        rejected_reason = None
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            try:
                X1 = _chebyshev_step(rhs_states, X, ds_try, q_full, r_cur)
                Xh = _chebyshev_step(rhs_states, X, 0.5 * ds_try, q_half, r_cur)
                r_half = rhs_states(Xh)
                X2 = _chebyshev_step(rhs_states, Xh, 0.5 * ds_try, q_half, r_half)
                a_new = action_of(X2)  # raises if a barrier constraint is crossed
            except ConstraintViolationError:
                rejected_reason = "infeasible"
                err = np.inf
            else:
                err = float(np.max(np.abs(X2 - X1)))
                tol = ctrl.atol + ctrl.rtol * float(np.max(np.abs(X2)))
                if not np.isfinite(a_new) or not np.all(np.isfinite(X2)):
                    rejected_reason = "nonfinite"
                elif err > tol:
                    rejected_reason = "error"
                elif a_new > a_cur + slack:
                    rejected_reason = "action"

        if rejected_reason is None:
            s += ds_try
            X = X2
            a_cur = a_new
            try:
                r_cur = rhs_states(X)
            except SingularFrameError as exc:
                exc.s = s
                raise
            res_cur = float(np.max(np.abs(r_cur)))
            steps_taken += 1
            if steps_taken % cfg.action_log_stride == 0 or res_cur <= residual_tol:
                action_history.append((s, a_cur))
                residual_history.append((s, res_cur))
                attempt_log.append((s, a_cur, res_cur, True))
            while targets and targets[0] <= s:
                snapshots.append((s, make_path(X)))
                targets.pop(0)
            if res_cur <= residual_tol:
                converged = True
                break
            factor = ctrl.max_growth
            if err > 0.0:
                factor = min(ctrl.max_growth, max(1.0, ctrl.safety * np.sqrt(tol / err)))
            ds = ds_try * factor
            rho_age += 1
            if use_cheb and rho_age >= 25:
                try:
                    rho = _estimate_rho(rhs_states, X, r_cur)
                    rho_age = 0
                except ConstraintViolationError:
                    pass
        else:
            steps_rejected += 1
            rejection_reasons[rejected_reason] = rejection_reasons.get(rejected_reason, 0) + 1
            logged_action = a_cur if rejected_reason in ("infeasible", "nonfinite") else a_new
            attempt_log.append((s + ds_try, logged_action, res_cur, False))
            if np.isfinite(err) and err > 0.0:
                tol = ctrl.atol + ctrl.rtol * float(np.max(np.abs(X)))
                factor = max(ctrl.min_shrink, min(0.5, ctrl.safety * np.sqrt(tol / err)))
            else:
                factor = 0.5
            ds = ds_try * factor
            if use_cheb:
                # a rejection often means the spectral radius moved under us;
                # re-estimate and never lower it within a rejection burst
                try:
                    rho = max(rho, _estimate_rho(rhs_states, X, r_cur))
                    rho_age = 0
                except ConstraintViolationError:
                    pass
            if ds < cfg.ds_min:
                raise StiffnessError(
                    f"step size underflowed at s={s:.6g} (reason: {rejected_reason})",
                    s=s,
                    ds=ds,
                    diagnostics={
                        "reason": rejected_reason,
                        "action": a_cur,
                        "residual": res_cur,
                        "steps_taken": steps_taken,
                        "steps_rejected": steps_rejected,
                    },
                )

    if action_history[-1][0] != s:
        action_history.append((s, a_cur))
        residual_history.append((s, res_cur))
        attempt_log.append((s, a_cur, res_cur, True))
    final = make_path(X)
    while targets and targets[0] <= s:
        snapshots.append((s, final))
        targets.pop(0)
    return FlowResult(
        final_path=final,
        action_history=action_history,
        residual_history=residual_history,
        snapshots=snapshots or None,
        steps_taken=steps_taken,
        steps_rejected=steps_rejected,
        converged=converged,
        attempt_log=attempt_log,
        rejection_reasons=rejection_reasons,
    )
