import numpy as np
import pytest

from aghf import (
    CurvePoint,
    DimensionError,
    HomotopyPath,
    action,
    builtin_system,
    default_metric,
    el_residual,
    lagrangian_partials,
    lagrangian_value,
    metric_G,
)
from aghf.config import straight_line_sketch
from aghf.lagrangian import path_acceleration, path_velocity


def test_admissible_point_costs_half_u_squared():
    rng = np.random.default_rng(0)
    kin = builtin_system("kinematic_unicycle")
    mf = default_metric(kin, 500.0)
    for _ in range(10):
        x = rng.normal(size=3)
        u = rng.normal(size=2)
        p = CurvePoint(x, kin.control_at(x) @ u)
        got = lagrangian_value(mf, p)
        assert abs(got - 0.5 * (u @ u)) <= 1e-9 * (1.0 + u @ u)


def test_drift_direction_costs_zero():
    cv = builtin_system("constant_velocity_unicycle")
    mf = default_metric(cv, 1000.0)
    x = np.array([0.3, 0.7, -0.4])
    p = CurvePoint(x, cv.drift_at(x))
    assert lagrangian_value(mf, p) == pytest.approx(0.0, abs=1e-12)


def test_parallel_parking_sketch_value():
    # lam ((0 - cos 0)^2 + (1 - sin 0)^2) / 2 = lam at the sideways-sliding point
    mf = default_metric(builtin_system("constant_velocity_unicycle"), 1000.0)
    p = CurvePoint(np.zeros(3), np.array([0.0, 1.0, 0.0]))
    assert lagrangian_value(mf, p) == pytest.approx(1000.0, rel=1e-12)


def test_partials_flat_metric_driftless():
    kin = builtin_system("dynamic_unicycle")  # constant G
    mf = default_metric(kin, 3.0)
    x = np.zeros(5)  # drift vanishes at the origin and so does its x-dependence paired with xdot
    xdot = np.array([0.1, -0.2, 0.3, 0.0, 0.0])
    p = CurvePoint(x, xdot)
    dLdx, dLdxdot = lagrangian_partials(mf, p)
    G = metric_G(mf, x)
    np.testing.assert_allclose(dLdxdot, G @ (xdot - kin.drift_at(x)), atol=1e-12)


def test_partials_zero_at_drift_direction():
    cv = builtin_system("constant_velocity_unicycle")
    mf = default_metric(cv, 100.0)
    x = np.array([0.1, 0.2, 0.9])
    p = CurvePoint(x, cv.drift_at(x))
    dLdx, dLdxdot = lagrangian_partials(mf, p)
    np.testing.assert_allclose(dLdxdot, np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(dLdx, np.zeros(3), atol=1e-12)


@pytest.mark.parametrize("name", ["constant_velocity_unicycle", "kinematic_unicycle"])
def test_partials_match_finite_differences(name):
    sys = builtin_system(name)
    mf = default_metric(sys, 40.0)
    rng = np.random.default_rng(9)
    h = 1e-6
    for _ in range(100):
        x = rng.normal(size=sys.n)
        xdot = rng.normal(size=sys.n)
        dLdx, dLdxdot = lagrangian_partials(mf, CurvePoint(x, xdot))
        for k in range(sys.n):
            e = np.zeros(sys.n)
            e[k] = h
            fd_x = (
                lagrangian_value(mf, CurvePoint(x + e, xdot))
                - lagrangian_value(mf, CurvePoint(x - e, xdot))
            ) / (2.0 * h)
            fd_v = (
                lagrangian_value(mf, CurvePoint(x, xdot + e))
                - lagrangian_value(mf, CurvePoint(x, xdot - e))
            ) / (2.0 * h)
            scale = max(1.0, abs(fd_x), abs(fd_v))
            assert abs(dLdx[k] - fd_x) <= 1e-6 * scale
            assert abs(dLdxdot[k] - fd_v) <= 1e-6 * scale


def _path_from_fn(fn, T, n_t, n):
    times = np.linspace(0.0, T, n_t)
    states = np.stack([fn(t) for t in times])
    return HomotopyPath(times, states, states[0], states[-1])


def test_action_zero_on_drift_following_path():
    cv = builtin_system("constant_velocity_unicycle")
    mf = default_metric(cv, 1000.0)
    path = _path_from_fn(lambda t: np.array([t, 0.0, 0.0]), 2.0, 101, 3)
    assert action(mf, path) <= 1e-10


def test_action_straight_parallel_parking_sketch_vs_quadrature_oracle():
    # analytic integrand: L(t) = 0.5 lam ((0 - 1)^2 + (1/T)^2) is constant in t
    lam, T = 1000.0, 5.0
    cv = builtin_system("constant_velocity_unicycle")
    mf = default_metric(cv, lam)
    x_i, x_f = np.zeros(3), np.array([0.0, 1.0, 0.0])
    sketch = straight_line_sketch(x_i, x_f, T)
    path = HomotopyPath.from_sketch(sketch, x_i, x_f, T, 201)

    def integrand(t):
        return 0.5 * lam * (1.0 + (1.0 / T) ** 2)

    # Richardson-extrapolated trapezoid on the analytic integrand
    def trap(n):
        ts = np.linspace(0.0, T, n)
        return np.trapezoid([integrand(t) for t in ts], ts)

    oracle = (4.0 * trap(4001) - trap(2001)) / 3.0
    got = action(mf, path)
    assert got == pytest.approx(oracle, rel=1e-6)
    assert got == pytest.approx(0.5 * lam * (T + 1.0 / T), rel=1e-9)


def test_action_grid_refinement_second_order():
    kin = builtin_system("kinematic_unicycle")
    mf = default_metric(kin, 10.0)
    T = 1.0

    def fn(t):
        return np.array([np.sin(t), 0.2 * t + 0.1 * np.sin(2.0 * t), 0.5 * np.cos(t) - 0.5])

    a_ref = action(mf, _path_from_fn(fn, T, 3201, 3))
    errs = [abs(action(mf, _path_from_fn(fn, T, n, 3)) - a_ref) for n in (101, 201, 401)]
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(o >= 1.7 for o in orders)


def test_el_residual_flat_straight_line_zero():
    dyn = builtin_system("dynamic_unicycle")
    mf = default_metric(dyn, 5.0)
    # no drift at zero velocities, flat metric, straight line through state space
    p = CurvePoint(np.zeros(5), np.array([0.0, 0.0, 0.0, 0.0, 0.0]), np.zeros(5))
    np.testing.assert_allclose(el_residual(mf, p), np.zeros(5), atol=1e-14)


def test_el_residual_requires_xddot():
    mf = default_metric(builtin_system("kinematic_unicycle"), 5.0)
    with pytest.raises(DimensionError):
        el_residual(mf, CurvePoint(np.zeros(3), np.zeros(3)))


@pytest.mark.parametrize("name", ["constant_velocity_unicycle", "kinematic_unicycle"])
def test_el_residual_matches_partials_time_derivative_oracle(name):
    # reconstruct a local quadratic curve and finite-difference dL/dxdot along it
    sys = builtin_system(name)
    mf = default_metric(sys, 20.0)
    rng = np.random.default_rng(12)
    h = 1e-5
    for _ in range(25):
        x = rng.normal(size=sys.n)
        xdot = rng.normal(size=sys.n)
        xddot = rng.normal(size=sys.n)

        def curve(tau):
            return x + tau * xdot + 0.5 * tau**2 * xddot, xdot + tau * xddot

        _, p_plus = curve(h)
        xp, vp = curve(h)
        xm, vm = curve(-h)
        _, dv_p = lagrangian_partials(mf, CurvePoint(xp, vp))
        _, dv_m = lagrangian_partials(mf, CurvePoint(xm, vm))
        ddt_dLdv = (dv_p - dv_m) / (2.0 * h)
        dLdx, _ = lagrangian_partials(mf, CurvePoint(x, xdot))
        oracle = ddt_dLdv - dLdx
        got = el_residual(mf, CurvePoint(x, xdot, xddot))
        np.testing.assert_allclose(got, oracle, rtol=1e-4, atol=1e-4 * max(1.0, np.max(np.abs(oracle))))


def test_homotopy_path_pins_endpoints_and_validates():
    times = np.linspace(0.0, 1.0, 11)
    states = np.random.default_rng(0).normal(size=(11, 2))
    x_i, x_f = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    path = HomotopyPath(times, states, x_i, x_f)
    np.testing.assert_array_equal(path.states[0], x_i)
    np.testing.assert_array_equal(path.states[-1], x_f)
    with pytest.raises(DimensionError):
        HomotopyPath(times[:4], states[:4], x_i, x_f)
    with pytest.raises(DimensionError):
        HomotopyPath(np.array([0.0, 0.1, 0.3, 0.6, 1.0]), states[:5], x_i, x_f)


def test_stencils_exact_on_quadratics():
    # the velocity stencil is exact for quadratics, the acceleration stencil too
    T, n_t = 2.0, 21
    times = np.linspace(0.0, T, n_t)
    dt = times[1] - times[0]
    states = np.stack([np.array([3.0 * t**2 - t, 0.5 * t**2 + 2.0]) for t in times])
    V = path_velocity(states, dt)
    A = path_acceleration(states, dt)
    np.testing.assert_allclose(V[:, 0], 6.0 * times - 1.0, atol=1e-10)
    np.testing.assert_allclose(V[:, 1], times, atol=1e-10)
    np.testing.assert_allclose(A[1:-1, 0], 6.0, atol=1e-9)
    np.testing.assert_allclose(A[1:-1, 1], 1.0, atol=1e-9)
