import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.spatial.transform import Rotation

from redunplan.collision import (Scene, _Box, collision_mask, config_in_collision,
                                 segment_box_distance2, segment_distance2, self_collision_pairs,
                                 shapes_intersect, _Round)
from redunplan.kinematics import tool_frames
from redunplan.shapes import Box, Capsule, Sphere, inflate, shape_from_dict

from conftest import random_q

I4 = np.eye(4)


def test_sphere_examples():
    a, b = Sphere([0, 0, 0], 0.1), Sphere([0.15, 0, 0], 0.1)
    assert shapes_intersect(a, I4, b, I4)
    assert not shapes_intersect(a, I4, Sphere([0.25, 0, 0], 0.1), I4)


def test_touching_counts_as_intersecting():
    assert shapes_intersect(Sphere([0, 0, 0], 0.5), I4, Sphere([1.0, 0, 0], 0.5), I4)
    box = Box([0, 0, 0], [0.5, 0.5, 0.5])
    assert shapes_intersect(box, I4, Sphere([1.0, 0, 0], 0.5), I4)
    assert shapes_intersect(box, I4, Box([1.0, 0, 0], [0.5, 0.5, 0.5]), I4)


def sampled_segment_distance(p0, p1, q0, q1, n=301):
    s = np.linspace(0, 1, n)[:, None]
    P = p0 + s * (p1 - p0)
    Q = q0 + s * (q1 - q0)
    return np.sqrt(((P[:, None] - Q[None]) ** 2).sum(-1)).min()


def test_segment_distance_against_dense_sampling():
    rng = np.random.default_rng(21)
    for _ in range(500):
        p0, p1, q0, q1 = rng.normal(size=(4, 3))
        if rng.random() < 0.1:
            q1 = q0.copy()  # a point
        if rng.random() < 0.1:
            p1 = p0 + 1e-3 * rng.normal(size=3)
        d = np.sqrt(segment_distance2(p0, p1, q0, q1))
        ref = sampled_segment_distance(p0, p1, q0, q1)
        step = (np.linalg.norm(p1 - p0) + np.linalg.norm(q1 - q0)) / 300
        assert d <= ref + 1e-12
        assert ref - d <= step


def test_capsule_pairs_agree_with_sampling_oracle():
    rng = np.random.default_rng(22)
    checked = 0
    for _ in range(500):
        p0, p1, q0, q1 = rng.uniform(-1, 1, size=(4, 3))
        ra, rb = rng.uniform(0.05, 0.4, size=2)
        ref = sampled_segment_distance(p0, p1, q0, q1)
        step = (np.linalg.norm(p1 - p0) + np.linalg.norm(q1 - q0)) / 300
        if abs(ref - (ra + rb)) <= step:
            continue
        checked += 1
        got = shapes_intersect(Capsule(p0, p1, ra), I4, Capsule(q0, q1, rb), I4)
        assert got == (ref < ra + rb)
    assert checked > 400


def point_box_distance(P, c, R, h):
    local = (P - c) @ R
    return np.linalg.norm(np.maximum(np.abs(local) - h, 0.0), axis=-1)


def test_segment_box_distance_against_sampling():
    rng = np.random.default_rng(23)
    for _ in range(300):
        c = rng.uniform(-0.5, 0.5, 3)
        R = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        h = rng.uniform(0.05, 0.5, 3)
        a, b = rng.uniform(-1.5, 1.5, size=(2, 3))
        box = _Box(c[None], R[None], h)
        seg = _Round(a[None], b[None], 0.0)
        d = np.sqrt(segment_box_distance2(seg, box)[0])
        s = np.linspace(0, 1, 4001)[:, None]
        ref = point_box_distance(a + s * (b - a), c, R, h).min()
        assert d <= ref + 1e-12
        assert ref - d <= np.linalg.norm(b - a) / 4000


def boxes_overlap_lp(c1, R1, h1, c2, R2, h2):
    # x with |R_k^T (x - c_k)| <= h_k for both boxes
    A = np.vstack([R1.T, -R1.T, R2.T, -R2.T])
    b = np.concatenate([h1 + R1.T @ c1, h1 - R1.T @ c1, h2 + R2.T @ c2, h2 - R2.T @ c2])
    res = linprog(np.zeros(3), A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs")
    return res.status == 0


def test_box_box_against_lp_oracle():
    rng = np.random.default_rng(24)
    seen = {True: 0, False: 0}
    for _ in range(300):
        c1, c2 = rng.uniform(-0.6, 0.6, size=(2, 3))
        R1, R2 = Rotation.random(2, random_state=rng.integers(1 << 30)).as_matrix()
        h1, h2 = rng.uniform(0.05, 0.4, size=(2, 3))
        surely_in = boxes_overlap_lp(c1, R1, h1 - 1e-6, c2, R2, h2 - 1e-6)
        maybe_in = boxes_overlap_lp(c1, R1, h1 + 1e-6, c2, R2, h2 + 1e-6)
        if surely_in != maybe_in:
            continue
        T1, T2 = np.eye(4), np.eye(4)
        T1[:3, :3], T1[:3, 3] = R1, c1
        T2[:3, :3], T2[:3, 3] = R2, c2
        got = shapes_intersect(Box([0, 0, 0], h1), T1, Box([0, 0, 0], h2), T2)
        assert got == surely_in
        seen[got] += 1
    assert seen[True] > 20 and seen[False] > 20


def test_adjacent_links_exempt():
    pairs = self_collision_pairs(7)
    assert all(j - i >= 2 for i, j in pairs)
    assert len(pairs) == 15


def test_home_is_collision_free_in_empty_scene(model):
    hit, pair = config_in_collision(model, None, np.zeros(7))
    assert not hit and pair is None


def test_box_around_tool_reports_tool_link(model):
    q = np.array([0.2, 0.1, -0.2, 0.3, 0.8, 0.1, 0.4])
    tcp = tool_frames(model, q)[:3, 3]
    scene = Scene((Box(tcp, [0.05, 0.05, 0.05]),))
    hit, pair = config_in_collision(model, scene, q)
    assert hit and pair == ("env", 6, 0)


def test_scene_pair_reported_for_default_cell(model, scene):
    hit, pair = config_in_collision(model, scene, np.zeros(7))
    assert hit and pair[0] == "env"


def test_rigid_relabeling_invariance(model, scene):
    rng = np.random.default_rng(25)
    R = Rotation.random(random_state=3).as_matrix()
    t = np.array([0.3, -1.2, 0.5])
    moved_model, moved_scene = model.rebased(R, t), scene.transformed(R, t)
    Q = random_q(model, rng, 400)
    a = collision_mask(model, scene, Q)
    b = collision_mask(moved_model, moved_scene, Q)
    assert a.any() and (~a).any()
    assert np.array_equal(a, b)


def test_batch_mask_matches_scalar_verdicts(model, scene):
    rng = np.random.default_rng(26)
    Q = random_q(model, rng, 60)
    mask = collision_mask(model, scene, Q)
    assert [config_in_collision(model, scene, q)[0] for q in Q] == mask.tolist()


def test_shape_validation_and_round_trip():
    with pytest.raises(Exception):
        Sphere([0, 0, 0], -1.0)
    with pytest.raises(Exception):
        Box([0, 0, 0], [0.1, 0.0, 0.1])
    for s in (Sphere([1, 2, 3], 0.1), Capsule([0, 0, 0], [1, 0, 0], 0.2),
              Box([0, 1, 0], [0.1, 0.2, 0.3])):
        again = shape_from_dict(s.to_dict())
        assert again.to_dict() == s.to_dict()
    assert inflate(Sphere([0, 0, 0], 0.1), 0.05).radius == pytest.approx(0.15)
