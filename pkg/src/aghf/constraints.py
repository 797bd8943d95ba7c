"""Input constraints via dynamic extension and barrier-weighted metrics.

Augmenting the state with the controls (new inputs = control rates) turns
input constraints into state constraints, which a positive barrier weight on
the metric then enforces softly: the flow is repelled before any constraint
boundary is reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ConstraintViolationError, DimensionError
from .metric import FrameCompletion
from .systems import ControlSystem

Array = np.ndarray

FEASIBILITY_FLOOR = 1e-9


@dataclass(frozen=True)
class Constraint:
    """A differentiable map l(y) whose positivity defines the feasible set."""

    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    name: str = "l"
    vectorized: bool = False

    def value_at(self, Y: Array) -> Array:
        Y = np.asarray(Y, dtype=float)
        if self.vectorized or Y.ndim == 1:
            return np.asarray(self.value(Y), dtype=float)
        flat = Y.reshape(-1, Y.shape[-1])
        return np.array([float(self.value(y)) for y in flat]).reshape(Y.shape[:-1])

    def grad_at(self, Y: Array) -> Array:
        Y = np.asarray(Y, dtype=float)
        if self.vectorized or Y.ndim == 1:
            return np.asarray(self.grad(Y), dtype=float)
        flat = Y.reshape(-1, Y.shape[-1])
        out = np.stack([np.asarray(self.grad(y), dtype=float) for y in flat])
        return out.reshape(Y.shape)


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier weight from constraints l_j(y) > 0.

    form "additive": b = 1 + sum_j 1/l_j (so b >= 1 on the feasible set);
    form "reciprocal_quadratic": b = prod_j 1/l_j, the natural choice for
    squared-magnitude bounds l_j = (u_max)^2 - u^2.
    """

    constraints: Sequence[Constraint]
    form: str = "reciprocal_quadratic"
    floor: float = FEASIBILITY_FLOOR

    def __post_init__(self):
        if self.form not in ("additive", "reciprocal_quadratic"):
            raise ConfigError(f"unknown barrier form {self.form!r}")
        if not self.floor > 0.0:
            raise ConfigError("feasibility floor must be positive")

    def _slacks(self, Y: Array) -> Array:
        """Constraint values stacked on the last axis, shape (..., n_c)."""
        if not self.constraints:
            return np.zeros(np.shape(Y)[:-1] + (0,))
        return np.stack([c.value_at(Y) for c in self.constraints], axis=-1)

    def _check(self, slacks: Array):
        for j, c in enumerate(self.constraints):
            vals = np.atleast_1d(slacks[..., j])
            if np.any(vals <= self.floor):
                worst = float(np.min(vals))
                raise ConstraintViolationError(
                    f"constraint {c.name!r} violated (min value {worst:.3e} <= floor {self.floor:.0e})",
                    constraint=c.name,
                    value=worst,
                )

    def min_slack(self, Y: Array) -> float:
        """Smallest constraint value over all states and constraints (inf if none)."""
        slacks = self._slacks(Y)
        return float(np.min(slacks)) if slacks.size else np.inf

    def feasible(self, Y: Array) -> bool:
        return self.min_slack(Y) > self.floor

    def value_at(self, Y: Array) -> Array:
        """Barrier weight b at states (..., d) -> (...,)."""
        slacks = self._slacks(Y)
        self._check(slacks)
        if self.form == "additive":
            return 1.0 + np.sum(1.0 / slacks, axis=-1)
        out = np.ones(np.shape(Y)[:-1])
        if slacks.size:
            out = np.prod(1.0 / slacks, axis=-1)
        return out

    def value_and_grad_at(self, Y: Array) -> Tuple[Array, Array]:
        """(b, grad b) batched."""
        Y = np.asarray(Y, dtype=float)
        slacks = self._slacks(Y)
        self._check(slacks)
        if not self.constraints:
            return np.ones(Y.shape[:-1]), np.zeros(Y.shape)
        grads = np.stack([c.grad_at(Y) for c in self.constraints], axis=-2)  # (..., n_c, d)
        if self.form == "additive":
            b = 1.0 + np.sum(1.0 / slacks, axis=-1)
            db = -np.einsum("...j,...jk->...k", 1.0 / slacks**2, grads)
            return b, db
        b = np.prod(1.0 / slacks, axis=-1)
        db = -b[..., None] * np.einsum("...j,...jk->...k", 1.0 / slacks, grads)
        return b, db


def barrier_value_grad(spec: BarrierSpec, y: Array) -> Tuple[float, Array]:
    """Barrier value and analytic gradient at a single state."""
    y = np.asarray(y, dtype=float)
    b, db = spec.value_and_grad_at(y)
    return float(b), db


def input_magnitude_bounds(u_max, n_base: int, m: int, floor: float = FEASIBILITY_FLOOR,
                           form: str = "reciprocal_quadratic") -> BarrierSpec:
    """Barrier for per-channel bounds |u_ch| < u_max on an augmented system.

    ``u_max`` maps 1-based input channels to bounds; channel ch lives at
    augmented-state index n_base + ch - 1.
    """
    constraints = []
    for ch, bound in sorted(u_max.items()):
        ch = int(ch)
        if not (1 <= ch <= m):
            raise ConfigError(f"input channel {ch} out of range 1..{m}")
        if not bound > 0.0:
            raise ConfigError(f"bound for channel {ch} must be positive")
        idx = n_base + ch - 1
        bound = float(bound)

        def value(Y, idx=idx, bound=bound):
            return bound**2 - np.asarray(Y, dtype=float)[..., idx] ** 2

        def grad(Y, idx=idx):
            Y = np.asarray(Y, dtype=float)
            g = np.zeros_like(Y)
            g[..., idx] = -2.0 * Y[..., idx]
            return g

        constraints.append(
            Constraint(value=value, grad=grad, name=f"|u{ch}| < {bound:g}", vectorized=True)
        )
    return BarrierSpec(constraints=tuple(constraints), form=form, floor=floor)


@dataclass(frozen=True)
class AugmentedProblem:
    """Dynamic extension y = (x, u) with new inputs v = du/dt."""

    base: ControlSystem
    augmented: ControlSystem
    boundary_u_i: Array
    boundary_u_f: Array
    barrier: Optional[BarrierSpec] = None
    completion: Optional[FrameCompletion] = None

    def lift_state(self, x: Array, u: Array) -> Array:
        return np.concatenate([np.asarray(x, dtype=float), np.asarray(u, dtype=float)])

    def lift_sketch(self, sketch, horizon_T: float):
        """Extend a base-state sketch with linearly interpolated control components."""
        u_i, u_f = self.boundary_u_i, self.boundary_u_f

        def lifted(t):
            tau = np.clip(t / horizon_T, 0.0, 1.0)
            return np.concatenate(
                [np.asarray(sketch(t), dtype=float), u_i + tau * (u_f - u_i)]
            )

        return lifted


def augment(base: ControlSystem, boundary_u: Tuple[Array, Array],
            barrier: Optional[BarrierSpec] = None) -> AugmentedProblem:
    """Extend the state with the controls; new inputs act on the control rates.

    The augmented drift is (F_d(x) + F(x)u, 0), the augmented control matrix
    the constant (0; I_m), and the frame completes to the identity, so the
    weighted metric is diag(lam, ..., lam, 1, ..., 1) times any barrier weight.
    """
    n, m = base.n, base.m
    u_i = np.asarray(boundary_u[0], dtype=float)
    u_f = np.asarray(boundary_u[1], dtype=float)
    if u_i.shape != (m,) or u_f.shape != (m,):
        raise DimensionError(f"boundary controls must have shape ({m},)")
    na = n + m

    def drift(Y):
        Y = np.asarray(Y, dtype=float)
        X, U = Y[..., :n], Y[..., n:]
        f = base.drift_at(X) + np.einsum("...ij,...j->...i", base.control_at(X), U)
        out = np.zeros(Y.shape[:-1] + (na,))
        out[..., :n] = f
        return out

    def drift_jacobian(Y):
        Y = np.asarray(Y, dtype=float)
        X, U = Y[..., :n], Y[..., n:]
        J = np.zeros(Y.shape[:-1] + (na, na))
        Jx = base.drift_jacobian_at(X)
        dF = base.control_derivs_at(X)  # (..., k, i, j)
        J[..., :n, :n] = Jx + np.einsum("...kij,...j->...ik", dF, U)
        J[..., :n, n:] = base.control_at(X)
        return J

    def control(Y):
        Y = np.asarray(Y, dtype=float)
        F = np.zeros(Y.shape[:-1] + (na, m))
        for j in range(m):
            F[..., n + j, j] = 1.0
        return F

    def control_derivs(Y):
        Y = np.asarray(Y, dtype=float)
        return np.zeros(Y.shape[:-1] + (na, na, m))

    augmented = ControlSystem(
        n=na,
        m=m,
        drift=drift,
        control_matrix=control,
        drift_jacobian=drift_jacobian,
        control_matrix_derivs=control_derivs,
        # Regional gesture only: f(x, u) is generally not globally Lipschitz in (x, u).
        lipschitz_drift=base.lipschitz_drift + base.lipschitz_control,
        lipschitz_control=0.0,
        name=f"{base.name}_augmented",
        vectorized=True,
        control_matrix_constant=True,
    )

    completion = FrameCompletion(
        func=lambda y: np.eye(na)[:, :n], derivs=None, constant=True, vectorized=False
    )
    return AugmentedProblem(
        base=base,
        augmented=augmented,
        boundary_u_i=u_i,
        boundary_u_f=u_f,
        barrier=barrier,
        completion=completion,
    )


@dataclass
class LagrangianCheckReport:
    """Discrepancy between the generic Lagrangian and its closed form on F_bar = I."""

    max_discrepancy: float
    node_discrepancies: Array
    frame_is_identity: bool


def constrained_lagrangian_check(mf, path) -> LagrangianCheckReport:
    """Verify L equals 0.5 b(y) (lam |xdot - f(x,u)|^2 + |udot|^2) along the path.

    Diagnostic only; requires the completed frame to be the identity (the
    dynamic-extension construction guarantees it).
    """
    from .lagrangian import lagrangian_along, path_velocity

    sys = mf.system
    n_total, m = sys.n, sys.m
    n_x = n_total - m
    Fbar = mf.frame_at(np.zeros(n_total))
    frame_is_identity = bool(np.max(np.abs(Fbar - np.eye(n_total))) <= 1e-12)

    X = path.states
    V = path_velocity(X, path.dt)
    f = sys.drift_at(X)
    w = V - f
    b = mf.barrier.value_at(X) if mf.barrier is not None else np.ones(X.shape[0])
    closed = 0.5 * b * (
        mf.lam * np.sum(w[:, :n_x] ** 2, axis=1) + np.sum(V[:, n_x:] ** 2, axis=1)
    )
    generic = lagrangian_along(mf, X, V)
    gaps = np.abs(generic - closed)
    return LagrangianCheckReport(
        max_discrepancy=float(np.max(gaps)),
        node_discrepancies=gaps,
        frame_is_identity=frame_is_identity,
    )
