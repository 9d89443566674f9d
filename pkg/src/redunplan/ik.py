"""Closed-form inverse kinematics of the rail-augmented arm.

With the slide fixed at ``u`` the remaining 6R arm with a spherical wrist has
up to eight solutions, indexed by ``g = 1 + 4*shoulder + 2*elbow + wrist``
(each bit selects the second root of the corresponding square root/arccos).

Joints whose limit span exceeds 2*pi admit several angle representatives of
the same IK solution; :func:`ik_nodes` expands those into distinct
configurations, each tagged with a layer key ``(g, shifts)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .kinematics import (N_JOINTS, SLIDE, RobotModel, TaskPath, TaskPose, dh_matrices,
                         jacobian_ee, tool_frames)

TWO_PI = 2.0 * np.pi
FK_TOL = 1e-9
DEDUP_TOL = 1e-6
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class IkBranch:
    g: int
    q: np.ndarray
    reachable: bool = True


def wrap_angle(x):
    """Map angles into (-pi, pi]."""
    y = np.remainder(x + np.pi, TWO_PI) - np.pi
    return np.where(y == -np.pi, np.pi, y)


def _arm_solutions(model: RobotModel, pose: TaskPose, u: np.ndarray):
    """Raw joint angles, shape (N, 8, 6), and a validity mask (N, 8)."""
    a, alpha, d, offset = model.dh.T
    u = np.asarray(u, dtype=float)
    n = u.shape[0]

    # flange pose in world, then the wrist centre (origin of frames 4 and 5)
    T_flange = pose.matrix @ np.linalg.inv(model.tool)
    T6_local = np.eye(4)
    T6_local[:3, :3] = np.array([[1, 0, 0],
                                 [0, np.cos(alpha[5]), -np.sin(alpha[5])],
                                 [0, np.sin(alpha[5]), np.cos(alpha[5])]])
    T6_local[2, 3] = d[5]
    wc_world = (T_flange @ np.linalg.inv(T6_local))[:3, 3]
    Rb = model.base_rotation
    origins = model.rail_origin + u[:, None] * model.rail_axis
    wc = (wc_world - origins) @ Rb  # rows: Rb^T (wc - origin)
    R06 = Rb.T @ T_flange[:3, :3]
    M_target = R06 @ T6_local[:3, :3].T  # = Rz(t4) Rx(al4) Rz(t5) Rx(al5) Rz(t6) composed with R03

    s1 = np.sign(np.sin(alpha[0]))
    h = d[1] + d[2] + np.cos(alpha[2]) * d[3]
    bx, by = a[2], -np.sin(alpha[2]) * d[3]
    L3 = np.hypot(bx, by)
    beta = np.arctan2(by, bx)

    theta = np.zeros((n, 8, 6))
    valid = np.zeros((n, 8), dtype=bool)
    rho2 = wc[:, 0] ** 2 + wc[:, 1] ** 2
    disc = rho2 - h * h
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    for shoulder in (0, 1):
        w = root if shoulder == 0 else -root
        t1 = np.arctan2(wc[:, 1], wc[:, 0]) - np.arctan2(-s1 * h, w)
        x1 = w - a[0]
        y1 = s1 * (wc[:, 2] - d[0])
        c_phi = (x1 * x1 + y1 * y1 - a[1] ** 2 - L3 ** 2) / (2.0 * a[1] * L3)
        ok_arm = (disc >= 0) & (np.abs(c_phi) <= 1.0)
        with np.errstate(invalid="ignore"):
            phi0 = np.arccos(c_phi)
        for elbow in (0, 1):
            phi = phi0 if elbow == 0 else -phi0
            t2 = np.arctan2(y1, x1) - np.arctan2(L3 * np.sin(phi), a[1] + L3 * np.cos(phi))
            t3 = phi - beta
            arm = np.stack([t1, t2, t3], axis=-1) - offset[:3]
            A = dh_matrices(model.dh[:3], np.nan_to_num(arm))
            R03 = A[:, 0, :3, :3] @ A[:, 1, :3, :3] @ A[:, 2, :3, :3]
            M = np.swapaxes(R03, -1, -2) @ M_target
            for wrist in (0, 1):
                t4, t5, t6 = _wrist_angles(M, alpha[3], alpha[4], flip=wrist == 1)
                g = 4 * shoulder + 2 * elbow + wrist
                theta[:, g, :3] = arm
                theta[:, g, 3] = t4 - offset[3]
                theta[:, g, 4] = t5 - offset[4]
                theta[:, g, 5] = t6 - offset[5]
                valid[:, g] = ok_arm
    theta = np.where(valid[..., None], theta, 0.0)
    return theta, valid


def _wrist_angles(M, alpha4, alpha5, flip):
    """Solve Rz(t4) Rx(alpha4) Rz(t5) Rx(alpha5) Rz(t6) = M for a batch of M."""
    s4, s5 = np.sign(np.sin(alpha4)), np.sign(np.sin(alpha5))
    c5 = -s4 * s5 * M[:, 2, 2]
    # |sin t5| from the other two entries of the unit column: exact near t5 = 0, pi
    sin5 = np.hypot(M[:, 0, 2], M[:, 1, 2])
    if flip:
        sin5 = -sin5
    t5 = np.arctan2(sin5, c5)
    sgn = np.where(sin5 >= 0, 1.0, -1.0)
    singular = np.abs(sin5) < 1e-12
    t4 = np.where(singular, 0.0, np.arctan2(s5 * sgn * M[:, 1, 2], s5 * sgn * M[:, 0, 2]))
    # Rz(t6) = P^T Rz(t4)^T M with P = Rx(alpha4) Rz(t5) Rx(alpha5)
    n = M.shape[0]
    Rz4 = np.zeros((n, 3, 3))
    Rz4[:, 0, 0] = Rz4[:, 1, 1] = np.cos(t4)
    Rz4[:, 1, 0] = np.sin(t4)
    Rz4[:, 0, 1] = -np.sin(t4)
    Rz4[:, 2, 2] = 1.0
    Rz5 = np.zeros((n, 3, 3))
    Rz5[:, 0, 0] = Rz5[:, 1, 1] = np.cos(t5)
    Rz5[:, 1, 0] = np.sin(t5)
    Rz5[:, 0, 1] = -np.sin(t5)
    Rz5[:, 2, 2] = 1.0
    Rx4 = _rx(alpha4)
    Rx5 = _rx(alpha5)
    P = Rx4 @ Rz5 @ Rx5
    X = np.swapaxes(P, -1, -2) @ np.swapaxes(Rz4, -1, -2) @ M
    t6 = np.arctan2(X[:, 1, 0], X[:, 0, 0])
    return t4, t5, t6


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def _verify(model: RobotModel, pose: TaskPose, q: np.ndarray) -> np.ndarray:
    T = tool_frames(model, q)
    pos_err = np.linalg.norm(T[..., :3, 3] - pose.p, axis=-1)
    rot_err = np.linalg.norm(T[..., :3, :3] - pose.R, axis=(-2, -1))
    return (pos_err <= FK_TOL) & (rot_err <= FK_TOL)


def ik_batch(model: RobotModel, pose: TaskPose, u) -> tuple[np.ndarray, np.ndarray]:
    """IK for one pose over many slide values.

    Returns ``q`` of shape (N, 8, 7) with arm angles wrapped into (-pi, pi]
    (or into the limits for joints spanning less than 2*pi) and a mask of
    valid, FK-verified, de-duplicated branches.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    theta, valid = _arm_solutions(model, pose, u)
    q = np.empty(theta.shape[:2] + (N_JOINTS,))
    q[..., :6] = _into_limits(model, wrap_angle(theta))
    q[..., SLIDE] = u[:, None]
    valid &= _verify(model, pose, q)
    # coalesced branches at singular postures: keep the lowest index
    for g in range(1, 8):
        diff = np.abs(wrap_angle(q[:, g, None, :6] - q[:, :g, :6])).max(axis=-1)
        dup = ((diff <= DEDUP_TOL) & valid[:, :g]).any(axis=-1)
        valid[:, g] &= ~dup
    return q, valid


def _into_limits(model: RobotModel, theta: np.ndarray) -> np.ndarray:
    """Shift angles of narrow-span joints by 2*pi when that brings them inside."""
    out = theta.copy()
    lo, hi = model.q_min[:6], model.q_max[:6]
    for k in range(6):
        if hi[k] - lo[k] >= TWO_PI:
            continue
        x = out[..., k]
        for m in (1, -1):
            y = x + m * TWO_PI
            fix = ((x < lo[k]) | (x > hi[k])) & (y >= lo[k]) & (y <= hi[k])
            x = np.where(fix, y, x)
        out[..., k] = x
    return out


def expanded_joints(model: RobotModel) -> tuple[int, ...]:
    """Arm joints (0-based) whose limit span reaches 2*pi."""
    span = model.q_max[:6] - model.q_min[:6]
    return tuple(int(k) for k in np.nonzero(span >= TWO_PI)[0])


def representatives(model: RobotModel, q: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """All 2*pi-shifted copies of ``q`` inside the limits of the wide joints."""
    joints = expanded_joints(model)
    options = []
    for k in joints:
        shifts = [m for m in (-2, -1, 0, 1, 2)
                  if model.q_min[k] <= q[k] + m * TWO_PI <= model.q_max[k]]
        options.append(shifts or [0])
    out = []
    for combo in itertools.product(*options):
        qq = q.copy()
        for k, m in zip(joints, combo):
            if m:
                qq[k] = q[k] + m * TWO_PI
        out.append((combo, qq))
    return out


def augmented_ik(model: RobotModel, pose: TaskPose, u: float) -> list[IkBranch]:
    """All real arm solutions at slide value ``u`` (principal angle representatives)."""
    q, valid = ik_batch(model, pose, [u])
    return [IkBranch(g + 1, q[0, g].copy()) for g in range(8) if valid[0, g]]


def ik_nodes(model: RobotModel, pose: TaskPose, u) -> list[list[tuple[tuple, np.ndarray]]]:
    """Per slide sample, the list of ``((g, shifts...), q)`` configurations."""
    q, valid = ik_batch(model, pose, u)
    out = []
    for j in range(q.shape[0]):
        nodes = []
        for g in range(8):
            if valid[j, g]:
                for shifts, qq in representatives(model, q[j, g]):
                    nodes.append(((g + 1,) + shifts, qq))
        out.append(nodes)
    return out


# ------------------------------------------------------------ representativeness

def selection_row(joint: int = SLIDE) -> np.ndarray:
    row = np.zeros(N_JOINTS)
    row[joint] = 1.0
    return row


def augmented_jacobian(model: RobotModel, q, joint: int = SLIDE) -> np.ndarray:
    """Task Jacobian stacked with the redundancy-parameter row, shape (..., 7, 7)."""
    J = jacobian_ee(model, q)
    row = np.broadcast_to(selection_row(joint), J.shape[:-2] + (1, N_JOINTS))
    return np.concatenate([J, row], axis=-2)


def numeric_rank(M, rtol: float = RANK_RTOL) -> np.ndarray:
    s = np.linalg.svd(M, compute_uv=False)
    return np.sum(s > rtol * s[..., :1], axis=-1)


@dataclass
class RepresentativenessReport:
    checked: int
    violations: list  # (i, j, key, rank)

    @property
    def ok(self) -> bool:
        return not self.violations


def rank_violations(model: RobotModel, configs, joint: int = SLIDE) -> np.ndarray:
    """Indices of configurations whose augmented Jacobian is rank deficient."""
    configs = np.asarray(configs, dtype=float).reshape(-1, N_JOINTS)
    if configs.shape[0] == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    ranks = numeric_rank(augmented_jacobian(model, configs, joint))
    bad = np.nonzero(ranks < N_JOINTS)[0]
    return bad, ranks[bad]


def check_representativeness(model: RobotModel, path: TaskPath, u_samples,
                             scene=None, joint: int = SLIDE) -> RepresentativenessReport:
    """Rank test of the augmented Jacobian at every admissible IK node.

    Nodes are the IK solutions of every waypoint at every slide sample that
    lie within the joint limits (and, if ``scene`` is given, are collision free).
    """
    from .constraints import admissible_mask

    u_samples = np.asarray(u_samples, dtype=float)
    keys, qs, where = [], [], []
    for i, pose in enumerate(path.poses):
        for j, nodes in enumerate(ik_nodes(model, pose, u_samples)):
            for key, q in nodes:
                keys.append(key)
                qs.append(q)
                where.append((i, j))
    if not qs:
        return RepresentativenessReport(0, [])
    Q = np.array(qs)
    ok = admissible_mask(model, scene, Q)
    idx = np.nonzero(ok)[0]
    bad, ranks = rank_violations(model, Q[idx], joint)
    violations = [(where[idx[b]][0], where[idx[b]][1], keys[idx[b]], int(r))
                  for b, r in zip(bad, ranks)]
    return RepresentativenessReport(int(idx.size), violations)
