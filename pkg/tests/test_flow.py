import numpy as np
import pytest

from aghf import (
    ControlSystem,
    FlowConfig,
    PlanningProblem,
    StepControl,
    StiffnessError,
    builtin_system,
    default_metric,
    solve_aghf,
)
from aghf.config import straight_line_sketch
from aghf.flow import aghf_rhs_covariant, aghf_rhs_el, _rhs_covariant_states
from aghf.lagrangian import CurvePoint, HomotopyPath, el_residual, path_acceleration, path_velocity
from aghf.metric import metric_G


def planar_integrator():
    def control(X):
        return np.broadcast_to(np.eye(2), X.shape[:-1] + (2, 2)).copy()

    return ControlSystem(
        n=2, m=2,
        drift=lambda X: np.zeros(X.shape[:-1] + (2,)),
        control_matrix=control,
        drift_jacobian=lambda X: np.zeros(X.shape[:-1] + (2, 2)),
        control_matrix_derivs=lambda X: np.zeros(X.shape[:-1] + (2, 2, 2)),
        name="planar_integrator", vectorized=True, control_matrix_constant=True,
    )


def parking_problem(lam=1000.0, T=5.0):
    sys = builtin_system("constant_velocity_unicycle")
    x_i, x_f = np.zeros(3), np.array([0.0, 1.0, 0.0])
    return PlanningProblem(sys, x_i, x_f, T, lam, straight_line_sketch(x_i, x_f, T)), default_metric(sys, lam)


def test_flat_driftless_straight_line_rhs_zero():
    sys = planar_integrator()
    mf = default_metric(sys, 3.0)
    x_i, x_f = np.zeros(2), np.array([1.0, 2.0])
    path = HomotopyPath.from_sketch(straight_line_sketch(x_i, x_f, 1.0), x_i, x_f, 1.0, 21)
    np.testing.assert_allclose(aghf_rhs_el(mf, path), np.zeros((21, 2)), atol=1e-12)


def test_fixed_point_sketch_returns_immediately():
    sys = planar_integrator()
    mf = default_metric(sys, 1.0)
    x_i, x_f = np.zeros(2), np.array([1.0, 1.0])
    prob = PlanningProblem(sys, x_i, x_f, 1.0, 1.0, straight_line_sketch(x_i, x_f, 1.0))
    res = solve_aghf(prob, mf, FlowConfig(n_t=21, s_max=5.0))
    assert res.converged and res.steps_taken == 0
    sketch = HomotopyPath.from_sketch(prob.initial_sketch, x_i, x_f, 1.0, 21)
    assert np.max(np.abs(res.final_path.states - sketch.states)) <= 1e-12


def test_parking_sketch_rhs_flags_nonslip_violation():
    prob, mf = parking_problem()
    path = HomotopyPath.from_sketch(prob.initial_sketch, prob.x_i, prob.x_f, 5.0, 51)
    rhs = aghf_rhs_el(mf, path)
    assert np.max(np.abs(rhs)) > 1.0
    assert np.max(np.abs(rhs[1:-1, 2])) > 1.0  # steering must react to the sideways slide
    np.testing.assert_array_equal(rhs[0], np.zeros(3))
    np.testing.assert_array_equal(rhs[-1], np.zeros(3))


@pytest.mark.parametrize("name", ["kinematic_unicycle", "constant_velocity_unicycle", "dynamic_unicycle"])
def test_rhs_formulations_agree_pointwise(name):
    sys = builtin_system(name)
    mf = default_metric(sys, 77.0)
    rng = np.random.default_rng(21)
    for _ in range(50):
        p = CurvePoint(rng.normal(size=sys.n), rng.normal(size=sys.n), rng.normal(size=sys.n))
        via_el = np.linalg.solve(metric_G(mf, p.x), el_residual(mf, p))
        via_cov = aghf_rhs_covariant(mf, p)
        scale = max(1.0, np.max(np.abs(via_el)))
        assert np.max(np.abs(via_el - via_cov)) <= 1e-6 * scale


def test_ghf_reduction_driftless_rhs_identical():
    # with no drift the covariant flow is the plain curve-straightening flow
    kin = builtin_system("kinematic_unicycle")
    mf = default_metric(kin, 15.0)
    x_i, x_f = np.zeros(3), np.array([1.0, 1.0, 0.5])
    path = HomotopyPath.from_sketch(straight_line_sketch(x_i, x_f, 1.0), x_i, x_f, 1.0, 31)
    X = path.states
    V = path_velocity(X, path.dt)
    A = path_acceleration(X, path.dt)
    got = _rhs_covariant_states(mf, X, path.dt)
    Gam = mf.christoffel_at(X[1:-1])
    ref = A[1:-1] + np.einsum("nkij,ni,nj->nk", Gam, V[1:-1], V[1:-1])
    np.testing.assert_array_equal(got[1:-1], ref)


def test_action_monotone_and_endpoints_pinned_along_flow():
    prob, mf = parking_problem()
    cfg = FlowConfig(n_t=51, s_max=2.0, action_log_stride=1, residual_tol=1e-12)
    res = solve_aghf(prob, mf, cfg)
    actions = [a for _, a in res.action_history]
    slack = 1e-8 * actions[0]
    assert all(b <= a + slack for a, b in zip(actions, actions[1:]))
    np.testing.assert_array_equal(res.final_path.states[0], prob.x_i)
    np.testing.assert_array_equal(res.final_path.states[-1], prob.x_f)
    assert res.steps_taken > 0


def test_formulation_equivalence_converged_paths():
    prob, mf = parking_problem()
    paths = {}
    for form in ("euler_lagrange", "covariant"):
        cfg = FlowConfig(n_t=51, s_max=150.0, rhs_form=form, residual_tol=1e-7,
                         action_log_stride=50, ds_max=10.0)
        paths[form] = solve_aghf(prob, mf, cfg).final_path.states
    gap = np.max(np.abs(paths["euler_lagrange"] - paths["covariant"]))
    assert gap <= 1e-4


def test_converged_path_satisfies_steady_state_residual():
    prob, mf = parking_problem()
    cfg = FlowConfig(n_t=51, s_max=3000.0, residual_tol=1e-7, action_log_stride=50, ds_max=10.0)
    res = solve_aghf(prob, mf, cfg)
    assert res.converged
    # the flow velocity of the final path really is below the declared tolerance
    assert np.max(np.abs(aghf_rhs_el(mf, res.final_path))) <= 1e-7


def test_converged_path_is_variational_minimum_locally():
    from aghf.lagrangian import action

    prob, mf = parking_problem()
    cfg = FlowConfig(n_t=51, s_max=3000.0, residual_tol=1e-7, action_log_stride=50, ds_max=10.0)
    res = solve_aghf(prob, mf, cfg)
    base_action = action(mf, res.final_path)
    base_residual = np.max(np.abs(aghf_rhs_el(mf, res.final_path)))
    rng = np.random.default_rng(17)
    for _ in range(5):
        bump = np.zeros_like(res.final_path.states)
        bump[1:-1] = 1e-3 * rng.normal(size=bump[1:-1].shape)
        neighbor = res.final_path.with_states(res.final_path.states + bump)
        assert action(mf, neighbor) > base_action
        assert np.max(np.abs(aghf_rhs_el(mf, neighbor))) > base_residual


def test_stiffness_error_when_ds_cannot_shrink():
    prob, mf = parking_problem()
    cfg = FlowConfig(
        n_t=51, s_max=10.0, initial_ds=1.0, ds_min=0.9, ds_max=1.0,
        stepper="euler", controller=StepControl(rtol=1e-8),
    )
    with pytest.raises(StiffnessError):
        solve_aghf(prob, mf, cfg)


def test_snapshots_recorded_at_requested_values():
    prob, mf = parking_problem()
    cfg = FlowConfig(n_t=51, s_max=1.0, residual_tol=1e-12, action_log_stride=10)
    res = solve_aghf(prob, mf, cfg, snapshot_s=[0.0, 0.5, 1.0])
    assert res.snapshots is not None
    svals = [s for s, _ in res.snapshots]
    assert svals[0] == 0.0
    assert any(s >= 0.5 for s in svals)
    assert len(res.snapshots) == 3
    for _, snap in res.snapshots:
        np.testing.assert_array_equal(snap.states[0], prob.x_i)


def test_attempt_log_marks_rejections():
    prob, mf = parking_problem()
    cfg = FlowConfig(n_t=51, s_max=2.0, action_log_stride=1, residual_tol=1e-12)
    res = solve_aghf(prob, mf, cfg)
    accepted = [row for row in res.attempt_log if row[3]]
    rejected = [row for row in res.attempt_log if not row[3]]
    assert len(accepted) == res.steps_taken + 1  # includes the s = 0 row
    assert len(rejected) == res.steps_rejected


def test_euler_stepper_matches_reference_ghf_loop():
    # fixed-step explicit loop vs the solver on a driftless problem
    kin = builtin_system("kinematic_unicycle")
    mf = default_metric(kin, 15.0)
    x_i, x_f = np.zeros(3), np.array([1.0, 0.6, 0.4])
    T, n_t, d, n_steps = 1.0, 31, 5e-5, 100
    prob = PlanningProblem(kin, x_i, x_f, T, 15.0, straight_line_sketch(x_i, x_f, T))
    cfg = FlowConfig(
        n_t=n_t, s_max=n_steps * d, initial_ds=d, ds_min=d, ds_max=d,
        stepper="euler", rhs_form="covariant", residual_tol=0.0,
        controller=StepControl(rtol=1.0),
    )
    res = solve_aghf(prob, mf, cfg)
    assert res.steps_taken == n_steps

    # step-doubling accepts the two-half-step value, so the matching reference
    # is a plain explicit loop at half the step size
    path = HomotopyPath.from_sketch(prob.initial_sketch, x_i, x_f, T, n_t)
    X = path.states.copy()
    dt = path.dt
    for _ in range(2 * n_steps):
        V = path_velocity(X, dt)
        A = path_acceleration(X, dt)
        Gam = mf.christoffel_at(X[1:-1])
        step = np.zeros_like(X)
        step[1:-1] = A[1:-1] + np.einsum("nkij,ni,nj->nk", Gam, V[1:-1], V[1:-1])
        X = X + (0.5 * d) * step
    assert np.max(np.abs(res.final_path.states - X)) <= 1e-12
