"""A-posteriori audit of a planned joint trajectory against its task path."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import Scene
from .constraints import in_A, in_B
from .ik import FK_TOL, rank_violations
from .kinematics import RobotModel, TaskPath, tool_frames


@dataclass
class AuditReport:
    n_waypoints: int
    max_position_error: float
    max_rotation_error: float
    violations: list = field(default_factory=list)  # (waypoint, tag, detail)
    rank_deficient: list = field(default_factory=list)  # waypoint indices

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        counts: dict[str, int] = {}
        for _, tag, _ in self.violations:
            counts[tag] = counts.get(tag, 0) + 1
        return {
            "waypoints": self.n_waypoints,
            "max_position_error_m": self.max_position_error,
            "max_rotation_error": self.max_rotation_error,
            "violations": counts,
            "representativeness_violations": len(self.rank_deficient),
            "clean": self.ok,
        }


def audit_trajectory(model: RobotModel, scene: Scene | None, path: TaskPath, trajectory,
                     fk_tol: float = FK_TOL, margin: float = 0.0) -> AuditReport:
    """FK consistency, position limits, collisions and joint velocities per waypoint."""
    Q = np.asarray(trajectory, dtype=float)
    if Q.shape != (len(path.poses), 7):
        raise ValueError(f"trajectory has shape {Q.shape}, path has {len(path.poses)} waypoints")
    T = tool_frames(model, Q)
    P = np.array([p.p for p in path.poses])
    R = np.array([p.R for p in path.poses])
    pos_err = np.linalg.norm(T[:, :3, 3] - P, axis=-1)
    rot_err = np.linalg.norm(T[:, :3, :3] - R, axis=(-2, -1))
    violations = []
    for i in range(Q.shape[0]):
        if not (pos_err[i] <= fk_tol and rot_err[i] <= fk_tol):
            violations.append((i, "fk_mismatch", float(max(pos_err[i], rot_err[i]))))
        for tag, detail in in_A(model, scene, Q[i], margin).violated:
            violations.append((i, tag, detail))
        if i > 0:
            for tag, detail in in_B(model, Q[i], Q[i - 1], path.tau).violated:
                violations.append((i, tag, detail))
    bad, _ = rank_violations(model, Q)
    return AuditReport(Q.shape[0], float(pos_err.max()), float(rot_err.max()), violations,
                       [int(b) for b in bad])
