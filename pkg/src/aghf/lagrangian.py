"""Lagrangian L = 0.5 (xdot - F_d)^T G (xdot - F_d), its partials, action, and EL residual.

The 1/2 factor is kept everywhere; it rescales the action uniformly and
changes no minimizer and no monotonicity property.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError
from .metric import MetricField

Array = np.ndarray


@dataclass(frozen=True)
class CurvePoint:
    """State, velocity, and (optionally) acceleration of a curve at one instant."""

    x: Array
    xdot: Array
    xddot: Optional[Array] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xdot", np.asarray(self.xdot, dtype=float))
        if self.xddot is not None:
            object.__setattr__(self, "xddot", np.asarray(self.xddot, dtype=float))
        vals = [self.x, self.xdot] + ([self.xddot] if self.xddot is not None else [])
        if any(not np.all(np.isfinite(v)) for v in vals):
            raise DimensionError("curve point entries must be finite")
        if self.xdot.shape != self.x.shape:
            raise DimensionError("x and xdot must have matching shapes")
        if self.xddot is not None and self.xddot.shape != self.x.shape:
            raise DimensionError("xddot must match the state shape")


def path_velocity(states: Array, dt: float) -> Array:
    """Second-order xdot on a uniform grid: central interior, one-sided endpoints."""
    V = np.empty_like(states)
    V[1:-1] = (states[2:] - states[:-2]) / (2.0 * dt)
    V[0] = (-3.0 * states[0] + 4.0 * states[1] - states[2]) / (2.0 * dt)
    V[-1] = (3.0 * states[-1] - 4.0 * states[-2] + states[-3]) / (2.0 * dt)
    return V


def path_acceleration(states: Array, dt: float) -> Array:
    """Central second differences at interior nodes; endpoint rows are zero (pinned)."""
    A = np.zeros_like(states)
    A[1:-1] = (states[2:] - 2.0 * states[1:-1] + states[:-2]) / (dt * dt)
    return A


@dataclass(frozen=True)
class HomotopyPath:
    """A uniformly time-discretized curve with hard-pinned endpoints."""

    times: Array
    states: Array
    x_i: Array
    x_f: Array

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        x_i = np.asarray(self.x_i, dtype=float)
        x_f = np.asarray(self.x_f, dtype=float)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise DimensionError("times must be (N,) and states (N, n)")
        if times.shape[0] < 5:
            raise DimensionError("need at least 5 grid nodes")
        gaps = np.diff(times)
        if np.max(np.abs(gaps - gaps[0])) > 1e-9 * max(1.0, abs(times[-1])):
            raise DimensionError("time grid must be uniform")
        states[0] = x_i
        states[-1] = x_f
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "x_i", x_i)
        object.__setattr__(self, "x_f", x_f)

    @property
    def n_t(self) -> int:
        return self.times.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon_T(self) -> float:
        return float(self.times[-1])

    def velocity(self) -> Array:
        return path_velocity(self.states, self.dt)

    def acceleration(self) -> Array:
        return path_acceleration(self.states, self.dt)

    def with_states(self, states: Array) -> "HomotopyPath":
        """Same grid and endpoints, new interior states."""
        return HomotopyPath(self.times, states, self.x_i, self.x_f)

    @classmethod
    def from_sketch(cls, sketch, x_i, x_f, horizon_T: float, n_t: int) -> "HomotopyPath":
        times = np.linspace(0.0, horizon_T, n_t)
        states = np.stack([np.asarray(sketch(t), dtype=float) for t in times])
        return cls(times, states, x_i, x_f)


def lagrangian_value(mf: MetricField, p: CurvePoint) -> float:
    """0.5 (xdot - F_d)^T G (xdot - F_d) at the point; nonnegative."""
    w = p.xdot - mf.system.drift_at(p.x)
    G = mf.G_at(p.x)
    return 0.5 * float(w @ G @ w)


def lagrangian_partials(mf: MetricField, p: CurvePoint):
    """(dL/dx, dL/dxdot) at the point."""
    w = p.xdot - mf.system.drift_at(p.x)
    G, dG = mf.G_and_derivs_at(p.x)
    Jf = mf.system.drift_jacobian_at(p.x)
    Gw = G @ w
    dLdxdot = Gw
    dLdx = -Jf.T @ Gw
    if dG is not None:
        dLdx = dLdx + 0.5 * np.einsum("i,kij,j->k", w, dG, w)
    return dLdx, dLdxdot


def el_residual_terms(G, dG, f, Jf, V, A) -> Array:
    """Batched d/dt dL/dxdot - dL/dx from precomputed metric and drift data."""
    w = V - f
    Gw = np.einsum("...ij,...j->...i", G, w)
    res = np.einsum("...ij,...j->...i", G, A - np.einsum("...ij,...j->...i", Jf, V))
    res = res + np.einsum("...ji,...j->...i", Jf, Gw)
    if dG is not None:
        res = res + np.einsum("...l,...lij,...j->...i", V, dG, w)
        res = res - 0.5 * np.einsum("...i,...kij,...j->...k", w, dG, w)
    return res


def el_residual(mf: MetricField, p: CurvePoint) -> Array:
    """Euler-Lagrange residual d/dt dL/dxdot - dL/dx at a point with xddot."""
    if p.xddot is None:
        raise DimensionError("el_residual needs xddot on the curve point")
    G, dG = mf.G_and_derivs_at(p.x)
    f = mf.system.drift_at(p.x)
    Jf = mf.system.drift_jacobian_at(p.x)
    return el_residual_terms(G, dG, f, Jf, p.xdot, p.xddot)


def lagrangian_along(mf: MetricField, states: Array, V: Array) -> Array:
    """L at every node of a discretized path."""
    f = mf.system.drift_at(states)
    w = V - f
    G = mf.G_at(states)
    return 0.5 * np.einsum("...i,...ij,...j->...", w, G, w)


def action(mf: MetricField, path: HomotopyPath) -> float:
    """Trapezoidal quadrature of L over the grid, using the module's stencils."""
    L = lagrangian_along(mf, path.states, path.velocity())
    return float(np.trapezoid(L, dx=path.dt))
