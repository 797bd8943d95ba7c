"""Control-affine systems with drift, their derivatives, and builtin models."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, UnknownSystemError

Array = np.ndarray

RANK_RTOL = 1e-10


def fd_step(x: Array) -> float:
    """Central-difference step balancing truncation and rounding at double precision."""
    return 1e-6 * max(1.0, float(np.linalg.norm(x)))


def _batch_call(fn: Callable[[Array], Array], X: Array, out_shape: tuple) -> Array:
    """Apply a single-state callable across the leading axes of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        out = np.asarray(fn(X), dtype=float)
        if out.shape != out_shape:
            raise DimensionError(f"evaluator returned shape {out.shape}, expected {out_shape}")
        return out
    flat = X.reshape(-1, X.shape[-1])
    out = np.stack([np.asarray(fn(x), dtype=float) for x in flat])
    return out.reshape(X.shape[:-1] + out_shape)


@dataclass(frozen=True)
class ControlSystem:
    """Control-affine dynamics xdot = F_d(x) + F(x) u on R^n with m <= n inputs.

    Evaluators map a state of shape (..., n) to batched outputs when
    ``vectorized`` is true; otherwise they are called one state at a time.
    ``drift_jacobian`` and ``control_matrix_derivs`` fall back to central
    finite differences when omitted.
    """

    n: int
    m: int
    drift: Callable[[Array], Array]
    control_matrix: Callable[[Array], Array]
    drift_jacobian: Optional[Callable[[Array], Array]] = None
    control_matrix_derivs: Optional[Callable[[Array], Array]] = None
    lipschitz_drift: float = 0.0
    lipschitz_control: float = 0.0
    name: str = "custom"
    vectorized: bool = False
    control_matrix_constant: bool = False

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise DimensionError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")
        if self.lipschitz_drift < 0.0 or self.lipschitz_control < 0.0:
            raise DimensionError("Lipschitz constants must be nonnegative")

    def _eval(self, fn, X, out_shape):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n:
            raise DimensionError(f"state has dimension {X.shape[-1]}, system has n={self.n}")
        if self.vectorized:
            return np.asarray(fn(X), dtype=float)
        return _batch_call(fn, X, out_shape)

    def drift_at(self, X: Array) -> Array:
        """F_d at states of shape (..., n) -> (..., n)."""
        return self._eval(self.drift, X, (self.n,))

    def control_at(self, X: Array) -> Array:
        """F at states of shape (..., n) -> (..., n, m)."""
        return self._eval(self.control_matrix, X, (self.n, self.m))

    def drift_jacobian_at(self, X: Array) -> Array:
        """dF_d/dx at states of shape (..., n) -> (..., n, n), FD fallback if needed."""
        if self.drift_jacobian is not None:
            return self._eval(self.drift_jacobian, X, (self.n, self.n))
        X = np.asarray(X, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.linalg.norm(X, axis=-1))
        J = np.empty(X.shape[:-1] + (self.n, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            step = h[..., None] * e
            J[..., :, k] = (self.drift_at(X + step) - self.drift_at(X - step)) / (2.0 * h[..., None])
        return J

    def control_derivs_at(self, X: Array) -> Array:
        """dF/dx_k at states of shape (..., n) -> (..., n, n, m), index order (k, i, j)."""
        if self.control_matrix_derivs is not None:
            return self._eval(self.control_matrix_derivs, X, (self.n, self.n, self.m))
        X = np.asarray(X, dtype=float)
        if self.control_matrix_constant:
            return np.zeros(X.shape[:-1] + (self.n, self.n, self.m))
        h = 1e-6 * np.maximum(1.0, np.linalg.norm(X, axis=-1))
        D = np.empty(X.shape[:-1] + (self.n, self.n, self.m))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            step = h[..., None] * e
            D[..., k, :, :] = (self.control_at(X + step) - self.control_at(X - step)) / (
                2.0 * h[..., None, None]
            )
        return D


def eval_dynamics(sys: ControlSystem, x: Array, u: Array) -> Array:
    """Evaluate xdot = F_d(x) + F(x) u."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[-1] != sys.n:
        raise DimensionError(f"state has dimension {x.shape[-1]}, system has n={sys.n}")
    if u.shape[-1] != sys.m:
        raise DimensionError(f"input has dimension {u.shape[-1]}, system has m={sys.m}")
    return sys.drift_at(x) + np.einsum("...ij,...j->...i", sys.control_at(x), u)


@dataclass
class AssumptionReport:
    """Diagnostics for the constant-rank and Lipschitz hypotheses."""

    ranks: list
    rank: int
    constant_rank: bool
    lipschitz_drift_estimate: float
    lipschitz_control_estimate: float
    warnings: list


def check_assumption_a(sys: ControlSystem, samples) -> AssumptionReport:
    """Report the numerical rank of F at each sample and empirical Lipschitz estimates.

    Findings are warnings, never errors: global Lipschitz constants cannot be
    certified from samples, only contradicted.
    """
    samples = [np.asarray(x, dtype=float) for x in samples]
    if not samples:
        raise DimensionError("check_assumption_a needs at least one sample")

    ranks = []
    for x in samples:
        sv = np.linalg.svd(sys.control_at(x), compute_uv=False)
        ranks.append(int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0.0 else 0)
    r_max = max(ranks)

    lip_d = 0.0
    lip_c = 0.0
    for x, y in combinations(samples, 2):
        gap = np.linalg.norm(x - y)
        if gap < 1e-12:
            continue
        lip_d = max(lip_d, np.linalg.norm(sys.drift_at(x) - sys.drift_at(y)) / gap)
        lip_c = max(lip_c, np.linalg.norm(sys.control_at(x) - sys.control_at(y), ord=2) / gap)

    warnings = []
    if any(r != r_max for r in ranks):
        drops = [i for i, r in enumerate(ranks) if r != r_max]
        warnings.append(f"rank drops below {r_max} at sample indices {drops}")
    if r_max < sys.m:
        warnings.append(f"F never reaches full column rank m={sys.m} (max observed {r_max})")
    if lip_d > sys.lipschitz_drift * (1.0 + 1e-9):
        warnings.append(
            f"empirical drift Lipschitz {lip_d:.6g} exceeds declared {sys.lipschitz_drift:.6g}"
        )
    if lip_c > sys.lipschitz_control * (1.0 + 1e-9):
        warnings.append(
            f"empirical control Lipschitz {lip_c:.6g} exceeds declared {sys.lipschitz_control:.6g}"
        )
    return AssumptionReport(
        ranks=ranks,
        rank=r_max,
        constant_rank=all(r == r_max for r in ranks),
        lipschitz_drift_estimate=lip_d,
        lipschitz_control_estimate=lip_c,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Builtin systems
# ---------------------------------------------------------------------------


def _kinematic_unicycle() -> ControlSystem:
    def drift(X):
        return np.zeros(X.shape[:-1] + (3,))

    def drift_jac(X):
        return np.zeros(X.shape[:-1] + (3, 3))

    def control(X):
        th = X[..., 2]
        F = np.zeros(X.shape[:-1] + (3, 2))
        F[..., 0, 0] = np.cos(th)
        F[..., 1, 0] = np.sin(th)
        F[..., 2, 1] = 1.0
        return F

    def control_derivs(X):
        th = X[..., 2]
        D = np.zeros(X.shape[:-1] + (3, 3, 2))
        D[..., 2, 0, 0] = -np.sin(th)
        D[..., 2, 1, 0] = np.cos(th)
        return D

    return ControlSystem(
        n=3,
        m=2,
        drift=drift,
        control_matrix=control,
        drift_jacobian=drift_jac,
        control_matrix_derivs=control_derivs,
        lipschitz_drift=0.0,
        lipschitz_control=1.0,
        name="kinematic_unicycle",
        vectorized=True,
    )


def _constant_velocity_unicycle() -> ControlSystem:
    def drift(X):
        th = X[..., 2]
        f = np.zeros(X.shape[:-1] + (3,))
        f[..., 0] = np.cos(th)
        f[..., 1] = np.sin(th)
        return f

    def drift_jac(X):
        th = X[..., 2]
        J = np.zeros(X.shape[:-1] + (3, 3))
        J[..., 0, 2] = -np.sin(th)
        J[..., 1, 2] = np.cos(th)
        return J

    def control(X):
        F = np.zeros(X.shape[:-1] + (3, 1))
        F[..., 2, 0] = 1.0
        return F

    def control_derivs(X):
        return np.zeros(X.shape[:-1] + (3, 3, 1))

    return ControlSystem(
        n=3,
        m=1,
        drift=drift,
        control_matrix=control,
        drift_jacobian=drift_jac,
        control_matrix_derivs=control_derivs,
        lipschitz_drift=1.0,
        lipschitz_control=0.0,
        name="constant_velocity_unicycle",
        vectorized=True,
        control_matrix_constant=True,
    )


def _dynamic_unicycle() -> ControlSystem:
    # State (qx, qy, theta, u1, u2); inputs act on the accelerations of u1, u2.
    def drift(X):
        th, u1, u2 = X[..., 2], X[..., 3], X[..., 4]
        f = np.zeros(X.shape[:-1] + (5,))
        f[..., 0] = u1 * np.cos(th)
        f[..., 1] = u1 * np.sin(th)
        f[..., 2] = u2
        return f

    def drift_jac(X):
        th, u1 = X[..., 2], X[..., 3]
        J = np.zeros(X.shape[:-1] + (5, 5))
        J[..., 0, 2] = -u1 * np.sin(th)
        J[..., 0, 3] = np.cos(th)
        J[..., 1, 2] = u1 * np.cos(th)
        J[..., 1, 3] = np.sin(th)
        J[..., 2, 4] = 1.0
        return J

    def control(X):
        F = np.zeros(X.shape[:-1] + (5, 2))
        F[..., 3, 0] = 1.0
        F[..., 4, 1] = 1.0
        return F

    def control_derivs(X):
        return np.zeros(X.shape[:-1] + (5, 5, 2))

    return ControlSystem(
        n=5,
        m=2,
        drift=drift,
        control_matrix=control,
        drift_jacobian=drift_jac,
        control_matrix_derivs=control_derivs,
        # Drift Jacobian norm grows with |u1|; constant quoted for |u1| <= 2.
        lipschitz_drift=float(np.sqrt(5.0)),
        lipschitz_control=0.0,
        name="dynamic_unicycle",
        vectorized=True,
        control_matrix_constant=True,
    )


_BUILTINS = {
    "kinematic_unicycle": _kinematic_unicycle,
    "constant_velocity_unicycle": _constant_velocity_unicycle,
    "dynamic_unicycle": _dynamic_unicycle,
}


def builtin_system(name: str) -> ControlSystem:
    """Return a builtin system by name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownSystemError(
            f"unknown system {name!r}; valid names: {sorted(_BUILTINS)}"
        ) from None
    return factory()


def builtin_system_names() -> list:
    """Names accepted by builtin_system, sorted."""
    return sorted(_BUILTINS)


@dataclass(frozen=True)
class PlanningProblem:
    """Steering task: reach x_f from x_i in horizon_T seconds, penalty weight lam."""

    system: ControlSystem
    x_i: Array
    x_f: Array
    horizon_T: float
    lam: float
    initial_sketch: Callable[[Array], Array]

    def __post_init__(self):
        object.__setattr__(self, "x_i", np.asarray(self.x_i, dtype=float))
        object.__setattr__(self, "x_f", np.asarray(self.x_f, dtype=float))
        n = self.system.n
        if self.x_i.shape != (n,) or self.x_f.shape != (n,):
            raise DimensionError(f"boundary states must have shape ({n},)")
        if not self.horizon_T > 0.0:
            raise DimensionError("horizon_T must be positive")
        if not self.lam > 0.0:
            raise DimensionError("lambda must be positive")
        v0 = np.asarray(self.initial_sketch(0.0), dtype=float)
        vT = np.asarray(self.initial_sketch(self.horizon_T), dtype=float)
        if np.max(np.abs(v0 - self.x_i)) > 1e-12 or np.max(np.abs(vT - self.x_f)) > 1e-12:
            raise DimensionError("initial sketch endpoints do not match x_i / x_f")
