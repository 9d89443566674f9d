import numpy as np
import pytest

from redunplan.ik import (DEDUP_TOL, FK_TOL, augmented_ik, augmented_jacobian,
                          check_representativeness, ik_batch, ik_nodes, numeric_rank,
                          representatives, wrap_angle)
from redunplan.kinematics import TaskPose, forward_kinematics, tool_frames
from redunplan.planner import build_grid
from redunplan.task import synthesize_path

from conftest import DRILL_R, random_q, vertical_path


def fk_error(model, pose, q):
    T = tool_frames(model, q)
    return max(np.abs(T[:3, 3] - pose.p).max(), np.abs(T[:3, :3] - pose.R).max())


def test_round_trip_1000_random_poses_all_branches(model):
    rng = np.random.default_rng(11)
    worst_fk, worst_contain, n_branches = 0.0, 0.0, 0
    for q in random_q(model, rng, 1000):
        pose = forward_kinematics(model, q)
        branches = augmented_ik(model, pose, q[6])
        assert branches, "a pose produced by FK must be reachable"
        for b in branches:
            worst_fk = max(worst_fk, fk_error(model, pose, b.q))
        n_branches += len(branches)
        d = [np.abs(wrap_angle(b.q[:6] - q[:6])).max() for b in branches]
        worst_contain = max(worst_contain, min(d))
    assert worst_fk <= FK_TOL
    assert worst_contain <= 1e-9
    assert n_branches > 1000


def test_branch_indices_unique_and_sorted(model):
    rng = np.random.default_rng(12)
    for q in random_q(model, rng, 50):
        gs = [b.g for b in augmented_ik(model, forward_kinematics(model, q), q[6])]
        assert gs == sorted(set(gs)) and all(1 <= g <= 8 for g in gs)


def test_unreachable_pose_is_empty(model):
    assert augmented_ik(model, TaskPose([4.0, 0.0, 1.0], DRILL_R), 0.0) == []


def test_batch_matches_single_slide_values(model):
    pose = TaskPose([1.3, 0.2, 1.1], DRILL_R)
    u = np.linspace(-1.0, 1.0, 37)
    q, valid = ik_batch(model, pose, u)
    for j in (0, 5, 36):
        q1, v1 = ik_batch(model, pose, u[j:j + 1])
        assert np.array_equal(v1[0], valid[j])
        assert np.array_equal(q1[0][v1[0]], q[j][valid[j]])


def test_representatives_stay_in_limits_and_differ_by_two_pi(model):
    q = np.array([0.5, 0.1, 0.2, -0.3, 0.4, 1.0, 0.0])
    reps = representatives(model, q)
    assert len(reps) > 1
    for shifts, qq in reps:
        assert model.within_limits(qq)
        assert np.allclose(wrap_angle(qq - q), 0.0, atol=1e-12)


def test_grid_nodes_equal_ik_nodes_bitwise(model, scene):
    path = vertical_path(1.3, 1.2, n=2)
    grid = build_grid(model, scene, path)
    for i in (0, 2):
        nodes = ik_nodes(model, path.poses[i], grid.u[[150, 159]])
        for col, per_u in zip((150, 159), nodes):
            for key, q in per_u:
                g0 = grid.layers.index(key)
                assert np.array_equal(grid.q[g0, i, col], q)


def test_dedup_keeps_distinct_solutions(model):
    rng = np.random.default_rng(13)
    for q in random_q(model, rng, 30):
        qs = np.array([b.q for b in augmented_ik(model, forward_kinematics(model, q), q[6])])
        for a in range(len(qs)):
            for b in range(a):
                assert np.abs(wrap_angle(qs[a, :6] - qs[b, :6])).max() > DEDUP_TOL


def test_generic_configuration_has_full_augmented_rank(model):
    q = np.array([0.3, -0.4, 0.5, 1.1, 0.7, -0.7, 0.2])
    assert numeric_rank(augmented_jacobian(model, q)) == 7


def test_wrist_singular_configuration_loses_rank(model):
    q = np.array([0.3, -0.4, 0.5, 1.1, 0.0, -0.7, 0.2])
    assert numeric_rank(augmented_jacobian(model, q)) < 7


def test_representativeness_report(model, scene):
    path = vertical_path(1.3, 1.25, n=2)
    report = check_representativeness(model, path, [-0.0012, 0.2], scene)
    assert report.checked > 0 and report.ok
    # a path whose wrist sits exactly on the singularity at u = 0
    q = np.array([0.0, 0.2, 0.1, 0.0, 0.0, 0.3, 0.0])
    pose = forward_kinematics(model, q)
    singular = synthesize_path(pose, pose, 1, 0.1)
    bad = check_representativeness(model, singular, [0.0])
    assert bad.violations and all(v[3] < 7 for v in bad.violations)
