import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redunplan.constraints import admissible_mask, in_A, in_B, velocity_ok

TAU = 0.55 / 10


def test_midpoint_of_limits_admissible_in_empty_scene(model):
    q = 0.5 * (model.q_min + model.q_max)
    assert in_A(model, None, q).admissible


def test_joint_two_past_limit(model):
    q = 0.5 * (model.q_min + model.q_max)
    q[1] = model.q_max[1] + 0.01
    assert ("pos_limit", 2) in in_A(model, None, q).violated


def test_closed_limit_interval(model):
    q = 0.5 * (model.q_min + model.q_max)
    q[6] = model.q_max[6]
    q[0] = model.q_min[0]
    assert in_A(model, None, q).admissible
    assert admissible_mask(model, None, q[None])[0]


def test_collision_tags(model, scene):
    verdict = in_A(model, scene, np.zeros(7))
    assert not verdict
    assert verdict.violated[0][0] == "env_collision"


def test_velocity_example_joint_one():
    # 0.2 rad in 55 ms is 3.636 rad/s against a 3.14 rad/s limit
    assert 0.2 / TAU == pytest.approx(3.636, abs=1e-3)


def test_in_b_examples(model):
    q = np.zeros(7)
    q1 = q.copy()
    q1[0] = 0.2
    assert in_B(model, q1, q, TAU).violated == [("vel_limit", 1)]
    q7 = q.copy()
    q7[6] = 0.0132  # one slide grid step: 0.24 m/s
    assert in_B(model, q7, q, TAU).admissible
    assert in_B(model, q, q, 1e-6).admissible


@given(st.lists(st.floats(-0.5, 0.5), min_size=7, max_size=7), st.floats(0.01, 1.0))
@settings(max_examples=200, deadline=None)
def test_vectorised_velocity_ok_matches_in_b(model, dq, tau):
    q_prev = np.zeros(7)
    q_curr = np.array(dq)
    assert bool(velocity_ok(q_curr, q_prev, tau, model.qd_max)) == in_B(model, q_curr, q_prev, tau).admissible


def test_velocity_limits_are_symmetric(model):
    q = np.zeros(7)
    d = np.zeros(7)
    d[3] = model.qd_max[3] * TAU
    assert in_B(model, q + d, q, TAU).admissible and in_B(model, q - d, q, TAU).admissible
    assert not in_B(model, q + 1.001 * d, q, TAU).admissible


def test_nonpositive_tau_rejected(model):
    with pytest.raises(ValueError):
        in_B(model, np.zeros(7), np.zeros(7), 0.0)
