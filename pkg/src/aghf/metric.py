"""Frame completion, the weighted Riemannian metric, its derivatives, and Christoffels.

The metric G(x) = (Fbar^-1)^T D Fbar^-1 is built from the completed frame
Fbar = (F_c | F) with D = diag(lam, ..., lam, 1, ..., 1): motion along the
completion columns costs lam per unit energy, motion along the control
columns costs 1. An optional barrier multiplies G by a positive weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, FrameCompletionError, SingularFrameError
from .systems import ControlSystem

Array = np.ndarray

COND_LIMIT = 1e12
GS_RESIDUAL_TOL = 1e-8


def _fix_sign(c: Array) -> Array:
    """Flip a column so its largest-magnitude entry is positive."""
    return -c if c[np.argmax(np.abs(c))] < 0.0 else c


def complete_frame(F: Array) -> Array:
    """Complete F to an invertible frame by Gram-Schmidt over the standard basis.

    Candidates e_1, ..., e_n are projected against span(F) and already accepted
    columns in fixed index order; residuals below 1e-8 are skipped; each kept
    column is normalized with its largest-magnitude entry made positive.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise DimensionError("complete_frame expects a 2-D matrix")
    n, m = F.shape
    if m > n:
        raise DimensionError(f"control matrix is {n}x{m}; need m <= n")
    if m == n:
        return np.zeros((n, 0))

    sv = np.linalg.svd(F, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise FrameCompletionError(
            f"control matrix is rank deficient (singular values {sv})"
        )

    basis = list(np.linalg.qr(F)[0].T)  # orthonormal basis of col(F)
    kept = []
    for j in range(n):
        c = np.zeros(n)
        c[j] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for q in basis:
                c = c - (q @ c) * q
        nrm = np.linalg.norm(c)
        if nrm < GS_RESIDUAL_TOL:
            continue
        c = _fix_sign(c / nrm)
        basis.append(c)
        kept.append(c)
        if len(kept) == n - m:
            break
    if len(kept) < n - m:
        raise FrameCompletionError(
            f"Gram-Schmidt found only {len(kept)} of {n - m} completion columns"
        )
    return np.column_stack(kept)


@dataclass(frozen=True)
class FrameCompletion:
    """A user- or builtin-supplied completion map x -> F_c(x) of shape (n, n-m).

    ``derivs`` (optional) maps x to the stack of dF_c/dx_k with shape
    (n, n, n-m), index order (k, row, column). ``constant`` completions are
    evaluated once and broadcast.
    """

    func: Callable[[Array], Array]
    derivs: Optional[Callable[[Array], Array]] = None
    constant: bool = False
    vectorized: bool = False


def gram_schmidt_completion(system: ControlSystem) -> FrameCompletion:
    """Pointwise Gram-Schmidt completion of the system's control matrix."""
    return FrameCompletion(
        func=lambda x: complete_frame(system.control_at(x)),
        derivs=None,
        constant=system.control_matrix_constant,
        vectorized=False,
    )


def builtin_completion(system: ControlSystem) -> Optional[FrameCompletion]:
    """Smooth analytic completion for the builtin systems, if one is known."""
    if system.name == "kinematic_unicycle":
        # (-sin, cos, 0) is orthonormal to both control columns for every theta
        # and, unlike pivoted Gram-Schmidt, smooth in theta globally.
        def func(X):
            th = np.asarray(X, dtype=float)[..., 2]
            C = np.zeros(np.shape(th) + (3, 1))
            C[..., 0, 0] = -np.sin(th)
            C[..., 1, 0] = np.cos(th)
            return C

        def derivs(X):
            th = np.asarray(X, dtype=float)[..., 2]
            D = np.zeros(np.shape(th) + (3, 3, 1))
            D[..., 2, 0, 0] = -np.cos(th)
            D[..., 2, 1, 0] = -np.sin(th)
            return D

        return FrameCompletion(func=func, derivs=derivs, constant=False, vectorized=True)
    if system.name == "constant_velocity_unicycle":
        return FrameCompletion(
            func=lambda x: np.eye(3)[:, :2], derivs=None, constant=True, vectorized=False
        )
    if system.name == "dynamic_unicycle":
        return FrameCompletion(
            func=lambda x: np.eye(5)[:, :3], derivs=None, constant=True, vectorized=False
        )
    return None


@dataclass(frozen=True)
class MetricField:
    """The weighted metric G = b * (Fbar^-1)^T D Fbar^-1 and its derivative modes."""

    system: ControlSystem
    lam: float
    completion: Union[str, FrameCompletion] = "gram_schmidt"
    barrier: Optional[object] = None  # BarrierSpec; duck-typed to avoid an import cycle
    deriv_mode: str = "auto"

    def __post_init__(self):
        if not self.lam > 0.0:
            raise DimensionError("lambda must be positive")
        if isinstance(self.completion, str):
            if self.completion != "gram_schmidt":
                raise ConfigError(f"unknown completion strategy {self.completion!r}")
            comp = gram_schmidt_completion(self.system)
        else:
            comp = self.completion
        object.__setattr__(self, "_comp", comp)

        n, m = self.system.n, self.system.m
        d = np.concatenate([np.full(n - m, float(self.lam)), np.ones(m)])
        object.__setattr__(self, "_dweights", d)

        frame_const = comp.constant and self.system.control_matrix_constant
        object.__setattr__(self, "_frame_constant", frame_const)

        comp_derivs_ok = comp.derivs is not None or comp.constant or n == m
        analytic_ok = frame_const or (
            comp_derivs_ok and self.system.control_matrix_derivs is not None
        )
        mode = self.deriv_mode
        if mode == "auto":
            mode = "analytic" if analytic_ok else "finite_difference"
        elif mode == "analytic" and not analytic_ok:
            raise ConfigError(
                "analytic metric derivatives need analytic frame and control derivatives"
            )
        elif mode not in ("analytic", "finite_difference"):
            raise ConfigError(f"unknown deriv_mode {self.deriv_mode!r}")
        object.__setattr__(self, "_mode", mode)
        object.__setattr__(self, "_cache", {})

    # frame assembly ----------------------------------------------------

    def _completion_at(self, X: Array) -> Array:
        comp = self._comp
        X = np.asarray(X, dtype=float)
        n, m = self.system.n, self.system.m
        if comp.constant:
            ref = X.reshape(-1, n)[0]
            C0 = np.asarray(comp.func(ref), dtype=float)
            return np.broadcast_to(C0, X.shape[:-1] + (n, n - m))
        if comp.vectorized:
            return np.asarray(comp.func(X), dtype=float)
        flat = X.reshape(-1, n)
        out = np.stack([np.asarray(comp.func(x), dtype=float) for x in flat])
        return out.reshape(X.shape[:-1] + (n, n - m))

    def frame_at(self, X: Array) -> Array:
        """Fbar = (F_c | F) at states of shape (..., n) -> (..., n, n)."""
        F = self.system.control_at(X)
        C = self._completion_at(X)
        return np.concatenate([C, F], axis=-1)

    def frame_derivs_at(self, X: Array) -> Optional[Array]:
        """dFbar/dx_k stacked as (..., n, n, n), or None when the frame is constant."""
        if self._frame_constant:
            return None
        comp = self._comp
        X = np.asarray(X, dtype=float)
        n = self.system.n
        dF = self.system.control_derivs_at(X)
        if comp.derivs is not None:
            if comp.vectorized:
                dC = np.asarray(comp.derivs(X), dtype=float)
            else:
                flat = X.reshape(-1, n)
                dC = np.stack([np.asarray(comp.derivs(x), dtype=float) for x in flat])
                dC = dC.reshape(X.shape[:-1] + (n, n, n - self.system.m))
        elif comp.constant:
            dC = np.zeros(X.shape[:-1] + (n, n, n - self.system.m))
        else:
            # central differences of the completion map
            h = 1e-6 * np.maximum(1.0, np.linalg.norm(X, axis=-1))
            cols = n - self.system.m
            dC = np.empty(X.shape[:-1] + (n, n, cols))
            for k in range(n):
                e = np.zeros(n)
                e[k] = 1.0
                step = h[..., None] * e
                dC[..., k, :, :] = (
                    self._completion_at(X + step) - self._completion_at(X - step)
                ) / (2.0 * h[..., None, None])
        return np.concatenate([dC, dF], axis=-1)

    def _invert_frame(self, Fbar: Array) -> Array:
        try:
            B = np.linalg.inv(Fbar)
        except np.linalg.LinAlgError:
            raise SingularFrameError("frame is exactly singular") from None
        cond = np.abs(Fbar).sum(axis=-1).max(axis=-1) * np.abs(B).sum(axis=-1).max(axis=-1)
        if not np.all(np.isfinite(B)) or np.any(cond >= COND_LIMIT):
            worst = float(np.max(cond[np.isfinite(cond)])) if np.any(np.isfinite(cond)) else np.inf
            raise SingularFrameError(
                f"frame condition number {worst:.3e} exceeds {COND_LIMIT:.0e}",
                condition=worst,
            )
        return B

    def _base_pair(self, X: Array):
        """(Fbar^-1, base G) at X, with the constant-frame result cached."""
        X = np.asarray(X, dtype=float)
        if self._frame_constant:
            cache = self._cache
            if "B0" not in cache:
                ref = X.reshape(-1, self.system.n)[0]
                Fbar = self.frame_at(ref)
                B0 = self._invert_frame(Fbar)
                G0 = np.einsum("ki,k,kj->ij", B0, self._dweights, B0)
                cache["B0"], cache["G0"] = B0, G0
                cache["G0inv"] = np.linalg.inv(G0)
            shape = X.shape[:-1]
            n = self.system.n
            return (
                np.broadcast_to(cache["B0"], shape + (n, n)),
                np.broadcast_to(cache["G0"], shape + (n, n)),
            )
        Fbar = self.frame_at(X)
        B = self._invert_frame(Fbar)
        G = np.einsum("...ki,...k,...kj->...ij", B, self._dweights, B)
        return B, G

    # metric and derivatives ---------------------------------------------

    def G_at(self, X: Array) -> Array:
        """Metric at states of shape (..., n) -> (..., n, n)."""
        _, G = self._base_pair(X)
        if self.barrier is not None:
            b = self.barrier.value_at(X)
            G = b[..., None, None] * G
        return G

    def _base_derivs(self, X: Array, B: Array, G0: Array) -> Optional[Array]:
        """dG0/dx_k as (..., n, n, n) for the unweighted metric; None when zero."""
        if self._frame_constant:
            return None
        if self._mode == "analytic":
            dF = self.frame_derivs_at(X)
            dB = -np.einsum("...ia,...kab,...bj->...kij", B, dF, B)
            d = self._dweights
            t = np.einsum("...kai,...a,...aj->...kij", dB, d, B)
            return t + np.swapaxes(t, -1, -2)
        n = self.system.n
        X = np.asarray(X, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.linalg.norm(X, axis=-1))
        dG = np.empty(X.shape[:-1] + (n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            step = h[..., None] * e
            _, Gp = self._base_pair(X + step)
            _, Gm = self._base_pair(X - step)
            dG[..., k, :, :] = (Gp - Gm) / (2.0 * h[..., None, None])
        return dG

    def G_and_derivs_at(self, X: Array):
        """(G, dG) batched; dG is None when the metric is exactly constant."""
        B, G0 = self._base_pair(X)
        if self.barrier is None:
            return G0, self._base_derivs(X, B, G0)
        b, db = self.barrier.value_and_grad_at(X)
        dG0 = self._base_derivs(X, B, G0)
        G = b[..., None, None] * G0
        dG = db[..., :, None, None] * G0[..., None, :, :]
        if dG0 is not None:
            dG = dG + b[..., None, None, None] * dG0
        return G, dG

    def cached_base_inverse(self) -> Optional[Array]:
        """Inverse of the (constant) unweighted metric, or None when state-dependent."""
        if not self._frame_constant:
            return None
        if "G0inv" not in self._cache:
            self._base_pair(np.zeros(self.system.n))
        return self._cache["G0inv"]

    def christoffel_at(self, X: Array) -> Array:
        """Levi-Civita symbols (..., k, i, j) of the weighted metric."""
        G, dG = self.G_and_derivs_at(X)
        n = self.system.n
        if dG is None:
            return np.zeros(np.shape(G)[:-2] + (n, n, n))
        # S[l, i, j] = dG_lj/dx_i + dG_li/dx_j - dG_ij/dx_l
        S = (
            np.swapaxes(dG, -3, -2)
            + np.moveaxis(dG, (-3, -2, -1), (-1, -3, -2))
            - dG
        )
        Ginv = np.linalg.inv(G)
        return 0.5 * np.einsum("...kl,...lij->...kij", Ginv, S)


# single-state wrappers -------------------------------------------------


def metric_G(mf: MetricField, x: Array) -> Array:
    """G(x) as an (n, n) matrix."""
    return mf.G_at(np.asarray(x, dtype=float))


def metric_derivatives(mf: MetricField, x: Array) -> list:
    """The n matrices dG/dx_k at x."""
    _, dG = mf.G_and_derivs_at(np.asarray(x, dtype=float))
    n = mf.system.n
    if dG is None:
        return [np.zeros((n, n)) for _ in range(n)]
    return [dG[k] for k in range(n)]


def christoffel(mf: MetricField, x: Array) -> Array:
    """Christoffel symbols Gamma[k, i, j] at x."""
    return mf.christoffel_at(np.asarray(x, dtype=float))


def bracket_vector(f: Array, dG, g: Array) -> Array:
    """Vector with i-th entry f^T (dG/dx_i) g."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    dG = np.asarray(dG, dtype=float)
    if dG.shape != (f.shape[0],) + (f.shape[0], g.shape[0]):
        raise DimensionError(f"dG has shape {dG.shape}, expected (n, n, n)")
    return np.einsum("i,kij,j->k", f, dG, g)


def directional_metric_derivative(f: Array, dG) -> Array:
    """Matrix with (i, j) entry sum_l f_l dG_ij/dx_l."""
    f = np.asarray(f, dtype=float)
    dG = np.asarray(dG, dtype=float)
    if dG.shape[0] != f.shape[0]:
        raise DimensionError(f"dG stacks {dG.shape[0]} matrices, f has length {f.shape[0]}")
    return np.einsum("l,lij->ij", f, dG)


def default_metric(
    system: ControlSystem,
    lam: float,
    barrier=None,
    deriv_mode: str = "auto",
    completion=None,
) -> MetricField:
    """MetricField with the builtin analytic completion when one is known."""
    if completion is None:
        completion = builtin_completion(system) or "gram_schmidt"
    return MetricField(
        system=system, lam=lam, completion=completion, barrier=barrier, deriv_mode=deriv_mode
    )
