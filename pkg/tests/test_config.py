import numpy as np
import pytest

from aghf import ConfigError, build_problem, parse_config
from aghf.config import (
    sinusoid_sketch,
    snapshot_targets,
    straight_line_sketch,
    waypoint_sketch,
)


def base_raw():
    return {
        "name": "t",
        "system": "constant_velocity_unicycle",
        "problem": {"x_i": [0, 0, 0], "x_f": [0, 1, 0], "T": 5.0, "lambda": 1000.0},
        "sketch": {"kind": "straight_line"},
        "flow": {"n_t": 21, "s_max": 1.0},
    }


def test_straight_line_sketch_endpoints():
    s = straight_line_sketch(np.zeros(3), np.array([0.0, 1.0, 0.0]), 5.0)
    np.testing.assert_array_equal(s(0.0), np.zeros(3))
    np.testing.assert_allclose(s(5.0), [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(s(2.5), [0.0, 0.5, 0.0], atol=1e-15)


def test_sinusoid_sketch_adds_full_period():
    x_i = np.zeros(5)
    x_f = np.array([0.0, -1.0, 0.0, 0.0, 0.0])
    s = sinusoid_sketch(x_i, x_f, 1.0, amplitude=1.0, axis=0)
    np.testing.assert_allclose(s(0.0), x_i, atol=1e-12)
    np.testing.assert_allclose(s(1.0), x_f, atol=1e-12)
    np.testing.assert_allclose(s(0.25), [1.0, -0.25, 0.0, 0.0, 0.0], atol=1e-12)


def test_waypoint_sketch_interpolates():
    s = waypoint_sketch([[0.0, 0.0, 0.0], [1.0, 2.0, -2.0], [2.0, 2.0, 2.0]], 2.0)
    np.testing.assert_allclose(s(0.5), [1.0, -1.0], atol=1e-14)
    np.testing.assert_allclose(s(1.5), [2.0, 0.0], atol=1e-14)
    with pytest.raises(ConfigError):
        waypoint_sketch([[0.0, 0.0], [1.5, 1.0]], 2.0)  # does not end at T
    with pytest.raises(ConfigError):
        waypoint_sketch([[0.0, 0.0], [0.0, 1.0]], 0.0)


def test_parse_rejects_unknown_keys():
    raw = base_raw()
    raw["extra"] = 1
    with pytest.raises(ConfigError, match="extra"):
        parse_config(raw)
    raw = base_raw()
    raw["problem"]["mass"] = 3
    with pytest.raises(ConfigError, match="mass"):
        parse_config(raw)


def test_parse_requires_problem_fields():
    raw = base_raw()
    del raw["problem"]["x_f"]
    with pytest.raises(ConfigError, match="x_f"):
        parse_config(raw)


def test_build_checks_shapes():
    raw = base_raw()
    raw["problem"]["x_i"] = [0, 0]
    with pytest.raises(ConfigError, match="shape"):
        build_problem(parse_config(raw))


def test_build_rejects_barrier_without_augment():
    raw = base_raw()
    raw["system"] = "kinematic_unicycle"
    raw["barrier"] = {"form": "reciprocal_quadratic", "u_max": {1: 2.0}}
    with pytest.raises(ConfigError, match="augment"):
        build_problem(parse_config(raw))


def test_build_augmented_problem_lifts_boundary_data():
    raw = base_raw()
    raw["system"] = "kinematic_unicycle"
    raw["problem"]["x_f"] = [0, -1, 0]
    raw["problem"]["T"] = 1.0
    raw["augment"] = {"u_i": [0, 0], "u_f": [0, 0]}
    raw["barrier"] = {"form": "reciprocal_quadratic", "u_max": {1: 2.0}}
    built = build_problem(parse_config(raw))
    assert built.system.n == 5 and built.system.m == 2
    np.testing.assert_array_equal(built.problem.x_i, np.zeros(5))
    np.testing.assert_array_equal(built.problem.x_f, [0, -1, 0, 0, 0])
    assert built.barrier is not None
    np.testing.assert_array_equal(built.metric.frame_at(np.zeros(5)), np.eye(5))


def test_snapshot_targets_geometric():
    raw = base_raw()
    raw["outputs"] = {"snapshot_count": 4}
    rc = parse_config(raw)
    targets = snapshot_targets(rc)
    assert targets[0] == 0.0
    assert len(targets) == 5
    assert targets[-1] == pytest.approx(1.0)
    ratios = [targets[i + 1] / targets[i] for i in range(1, 4)]
    assert all(r == pytest.approx(ratios[0], rel=1e-9) for r in ratios)
