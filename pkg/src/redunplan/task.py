"""Hole-to-hole tasks: path synthesis, task files, trajectory CSV and the
fixed-slide baseline used for comparison."""
from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .collision import Scene
from .constraints import admissible_mask, velocity_ok
from .errors import FixedSlideInfeasible, ModelError, SingularConfiguration
from .ik import ik_nodes
from .kinematics import N_JOINTS, SLIDE, RobotModel, TaskPath, TaskPose
from .planner import PlanResult, local_cost
from .stiffness import ETA_Z, mma_batch

DEFAULT_BUDGET = 13.62  # s, drilling time available for planning the next leg
FREE_INITIAL = "free-initial"
CHAINED = "chained"


@dataclass
class Leg:
    start: int
    end: int
    n_waypoints: int
    duration: float


@dataclass
class TaskSpec:
    holes: list[TaskPose]
    legs: list[Leg]
    mode: str = FREE_INITIAL
    initial_q: np.ndarray | None = None
    budget_s: float = DEFAULT_BUDGET
    extras: dict = field(default_factory=dict)

    def leg_path(self, k: int) -> TaskPath:
        leg = self.legs[k]
        return synthesize_path(self.holes[leg.start], self.holes[leg.end],
                               leg.n_waypoints, leg.duration)


def synthesize_path(a: TaskPose, b: TaskPose, n_steps: int, duration: float) -> TaskPath:
    """Straight-line positions with constant (or slerped) orientation, end points exact."""
    if n_steps < 1:
        raise ValueError("a leg needs at least one step")
    s = np.arange(n_steps + 1) / n_steps
    same_rotation = np.abs(a.R - b.R).max() <= 1e-9
    if not same_rotation:
        slerp = Slerp([0.0, 1.0], Rotation.from_matrix(np.stack([a.R, b.R])))
        rotations = slerp(s).as_matrix()
    poses = []
    for i, si in enumerate(s):
        if i == 0:
            p = a.p.copy()
        elif i == n_steps:
            p = b.p.copy()
        else:
            p = a.p + si * (b.p - a.p)
        if same_rotation or i == 0:
            R = a.R
        elif i == n_steps:
            R = b.R
        else:
            R = rotations[i]
        poses.append(TaskPose(p, R))
    return TaskPath(tuple(poses), duration)


def task_from_dict(data: dict) -> TaskSpec:
    try:
        holes = [TaskPose(h["p"], h["R"]) for h in data["holes"]]
        legs = [Leg(int(leg["from"]), int(leg["to"]), int(leg["N_i"]), float(leg["T"]))
                for leg in data["legs"]]
        mode = data.get("mode", FREE_INITIAL)
        initial = data.get("initial_q")
        budget = float(data.get("budget_s", DEFAULT_BUDGET))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed task description: {exc}") from exc
    if mode not in (FREE_INITIAL, CHAINED):
        raise ModelError(f"unknown task mode {mode!r}")
    if mode == CHAINED and initial is None:
        raise ModelError("chained mode needs initial_q")
    for n, hole in enumerate(holes):
        if not hole.is_valid():
            raise ModelError(f"hole {n} orientation is not a rotation matrix")
    for leg in legs:
        if leg.n_waypoints < 1 or not leg.duration > 0:
            raise ModelError("every leg needs N_i >= 1 and T > 0")
        if not (0 <= leg.start < len(holes) and 0 <= leg.end < len(holes)):
            raise ModelError("leg refers to an unknown hole")
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (N_JOINTS,):
            raise ModelError("initial_q must have 7 entries")
    return TaskSpec(holes, legs, mode, initial, budget)


def load_task(path: str | Path) -> TaskSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read task file {path}: {exc}") from exc
    return task_from_dict(data)


# ------------------------------------------------------------ trajectory files

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv(trajectory, tau: float) -> str:
    lines = ["t,q1,q2,q3,q4,q5,q6,q7"]
    for i, q in enumerate(np.asarray(trajectory)):
        lines.append(",".join([_fmt(i * tau)] + [_fmt(v) for v in q]))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not rows or rows[0].split(",")[0] != "t":
        raise ModelError(f"{path} is not a trajectory file")
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    return data[:, 0], data[:, 1:]


def atomic_write(path: str | Path, content: str | bytes) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------ fixed-slide baseline

def fixed_slide_plan(model: RobotModel, scene: Scene | None, path: TaskPath, u_fixed: float,
                     initial=None, eta=ETA_Z, weights=None, compliance=None,
                     margin: float = 0.0) -> PlanResult:
    """Squared IK at a frozen slide value, following one branch along the path.

    The first waypoint takes the branch nearest ``initial`` (or the stiffest
    one when no initial configuration is given); later waypoints keep the same
    branch key and fall back to the nearest admissible configuration.
    """
    if not model.q_min[SLIDE] <= u_fixed <= model.q_max[SLIDE]:
        raise ValueError("u_fixed lies outside the slide limits")
    started = time.perf_counter()
    tau = path.tau
    traj, keys = [], []
    for i, pose in enumerate(path.poses):
        nodes = ik_nodes(model, pose, np.array([u_fixed]))[0]
        if nodes:
            cand_keys = [k for k, _ in nodes]
            Q = np.array([q for _, q in nodes])
            ok = admissible_mask(model, scene, Q, margin)
        else:
            cand_keys, Q, ok = [], np.zeros((0, N_JOINTS)), np.zeros(0, dtype=bool)
        if not ok.any():
            raise FixedSlideInfeasible(
                f"waypoint {i} has no admissible configuration at slide {u_fixed:.4f} m", i)
        if i > 0:
            ok &= velocity_ok(Q, traj[-1], tau, model.qd_max)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            raise FixedSlideInfeasible(
                f"waypoint {i}: every configuration at slide {u_fixed:.4f} m breaks a velocity limit", i)
        if i == 0 and initial is None:
            values = mma_batch(model, Q[idx], eta, compliance)
            if np.all(np.isnan(values)):
                raise SingularConfiguration("all start configurations are singular along eta")
            pick = idx[int(np.nanargmax(values))]
        else:
            ref = initial if i == 0 else traj[-1]
            same = [n for n in idx if i > 0 and cand_keys[n] == keys[-1]]
            if same:
                pick = same[0]
            else:
                dist = [local_cost(Q[n], ref, weights) for n in idx]
                pick = idx[int(np.argmin(dist))]
        traj.append(Q[pick])
        keys.append(cand_keys[pick])
    traj = np.array(traj)
    stage_costs = np.array([local_cost(traj[i], traj[i - 1], weights) for i in range(1, len(traj))])
    total = 0.0
    for c in stage_costs:
        total = total + c
    values = mma_batch(model, traj[-1:], eta, compliance)
    if np.isnan(values[0]):
        raise SingularConfiguration("fixed-slide terminal configuration is singular along eta")
    return PlanResult(trajectory=traj, nodes=keys, total_cost=float(total),
                      stage_costs=stage_costs, terminal_mma=float(values[0]),
                      timing=time.perf_counter() - started)


# ------------------------------------------------------------ multi-leg runs

def plan_task(model: RobotModel, scene: Scene | None, task: TaskSpec, grid_params=None,
              eta=ETA_Z, weights=None, compliance=None, threads: int = 1,
              margin: float = 0.0) -> list[PlanResult]:
    """Plan every leg in order, each leg starting where the previous one ended.

    The first leg starts free unless the task is ``chained``, in which case it
    starts at ``task.initial_q``.
    """
    from .planner import plan

    initial = task.initial_q if task.mode == CHAINED else None
    results = []
    for k in range(len(task.legs)):
        result = plan(model, scene, task.leg_path(k), grid_params, eta, initial=initial,
                      weights=weights, compliance=compliance, threads=threads, margin=margin)
        results.append(result)
        initial = result.trajectory[-1]
    return results
