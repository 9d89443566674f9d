"""Admissibility of configurations (position limits, collisions) and of transitions
between consecutive waypoints (backward-Euler joint velocities)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import Scene, collision_mask, config_in_collision
from .kinematics import RobotModel


@dataclass
class AdmissibilityVerdict:
    violated: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return not self.violated

    def __bool__(self) -> bool:
        return self.admissible


def in_A(model: RobotModel, scene: Scene | None, q, margin: float = 0.0) -> AdmissibilityVerdict:
    """Closed position limits plus self- and environment-collision freedom.

    Tags are ``("pos_limit", k)`` with 1-based joint ``k``,
    ``("self_collision", (a, b))`` and ``("env_collision", (link, shape))``.
    """
    q = np.asarray(q, dtype=float)
    violated = []
    for k in range(q.shape[0]):
        if not (model.q_min[k] <= q[k] <= model.q_max[k]):
            violated.append(("pos_limit", k + 1))
    hit, pair = config_in_collision(model, scene, q, margin)
    if hit:
        kind, a, b = pair
        violated.append(("self_collision" if kind == "self" else "env_collision", (a, b)))
    return AdmissibilityVerdict(violated)


def velocity_ok(q_curr, q_prev, tau: float, qd_max) -> np.ndarray:
    """Backward-Euler velocity test, broadcasting over leading axes."""
    qd = (np.asarray(q_curr) - np.asarray(q_prev)) / tau
    return np.all(np.abs(qd) <= qd_max, axis=-1)


def in_B(model: RobotModel, q_curr, q_prev, tau: float) -> AdmissibilityVerdict:
    """Symmetric joint-velocity limits on ``(q_curr - q_prev) / tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    qd = (np.asarray(q_curr, dtype=float) - np.asarray(q_prev, dtype=float)) / tau
    violated = [("vel_limit", k + 1) for k in range(qd.shape[0])
                if not abs(qd[k]) <= model.qd_max[k]]
    return AdmissibilityVerdict(violated)


def admissible_mask(model: RobotModel, scene: Scene | None, Q, margin: float = 0.0) -> np.ndarray:
    """Vectorised ``in_A`` for a batch of configurations (M, 7)."""
    Q = np.asarray(Q, dtype=float).reshape(-1, 7)
    ok = model.within_limits(Q)
    if ok.any():
        idx = np.nonzero(ok)[0]
        ok[idx] = ~collision_mask(model, scene, Q[idx], margin)
    return ok
