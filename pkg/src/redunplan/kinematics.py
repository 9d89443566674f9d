"""Forward kinematics and tool-frame Jacobian of a 6R arm carried by a linear rail.

Joint vectors are length-7 float arrays ordered ``(q1..q6, slide)``; the six arm
joints are revolute (rad) and the seventh is the prismatic rail (m).  The arm
follows the standard (distal) Denavit-Hartenberg convention::

    A_k = Rz(theta_k + offset_k) Tz(d_k) Tx(a_k) Rx(alpha_k)

and the arm base frame sits at ``rail_origin + slide * rail_axis`` with a fixed
orientation ``base_rotation``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ModelError, RepresentationSingularity
from .shapes import Shape, shape_from_dict

N_JOINTS = 7
N_LINKS = 7  # base carriage + six arm links; link 6 carries the tool
SLIDE = 6

_HALF_PI = np.pi / 2


@dataclass(frozen=True)
class TaskPose:
    p: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if p.shape != (3,) or R.shape != (3, 3):
            raise ValueError("TaskPose needs a 3-vector and a 3x3 matrix")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "R", R)

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    def is_valid(self, tol: float = 1e-9) -> bool:
        return (np.abs(self.R.T @ self.R - np.eye(3)).max() <= tol
                and abs(np.linalg.det(self.R) - 1.0) <= tol)


@dataclass(frozen=True)
class TaskPath:
    poses: tuple[TaskPose, ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 2:
            raise ValueError("a path needs at least two samples (N_i >= 1)")
        if not self.duration > 0:
            raise ValueError("path duration must be positive")

    @property
    def n_steps(self) -> int:
        return len(self.poses) - 1

    @property
    def tau(self) -> float:
        return self.duration / self.n_steps


@dataclass(frozen=True, eq=False)
class RobotModel:
    rail_axis: np.ndarray
    rail_origin: np.ndarray
    dh: np.ndarray  # rows (a, alpha, d, theta_offset)
    tool: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray
    qd_max: np.ndarray
    link_shapes: tuple[tuple[Shape, ...], ...] = ()
    base_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        conv = {
            "rail_axis": (3,), "rail_origin": (3,), "dh": (6, 4), "tool": (4, 4),
            "q_min": (N_JOINTS,), "q_max": (N_JOINTS,), "qd_max": (N_JOINTS,),
            "base_rotation": (3, 3),
        }
        for name, shape in conv.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape or not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} must be a finite array of shape {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        shapes = tuple(tuple(link) for link in self.link_shapes)
        if len(shapes) == 0:
            shapes = ((),) * N_LINKS
        if len(shapes) != N_LINKS:
            raise ModelError(f"link_shapes needs {N_LINKS} entries (base + 6 links)")
        object.__setattr__(self, "link_shapes", shapes)
        self._validate()

    def _validate(self):
        if abs(np.linalg.norm(self.rail_axis) - 1.0) > 1e-12:
            raise ModelError("rail axis must have unit norm")
        Rb = self.base_rotation
        if np.abs(Rb.T @ Rb - np.eye(3)).max() > 1e-9 or np.linalg.det(Rb) < 0:
            raise ModelError("base_rotation is not a rotation matrix")
        Rt = self.tool[:3, :3]
        if (np.abs(Rt.T @ Rt - np.eye(3)).max() > 1e-9 or np.linalg.det(Rt) < 0
                or np.any(self.tool[3] != [0, 0, 0, 1])):
            raise ModelError("tool transform is not rigid")
        if not np.all(self.q_min < self.q_max):
            raise ModelError("q_min must be strictly below q_max")
        if not np.all(self.qd_max > 0):
            raise ModelError("qd_max must be positive")
        a, alpha, d, _ = self.dh.T
        # closed-form IK needs an ortho-parallel shoulder and a spherical wrist
        if abs(abs(alpha[0]) - _HALF_PI) > 1e-9:
            raise ModelError("joint 2 axis must be perpendicular to joint 1 (|alpha1| = pi/2)")
        if abs(alpha[1]) > 1e-12:
            raise ModelError("joints 2 and 3 must be parallel (alpha2 = 0)")
        if a[1] <= 0:
            raise ModelError("upper arm length a2 must be positive")
        if a[3] != 0 or a[4] != 0 or d[4] != 0:
            raise ModelError("spherical wrist requires a4 = a5 = d5 = 0")
        if abs(abs(alpha[3]) - _HALF_PI) > 1e-9 or abs(abs(alpha[4]) - _HALF_PI) > 1e-9:
            raise ModelError("wrist axes must be mutually perpendicular (|alpha4| = |alpha5| = pi/2)")
        if a[5] != 0:
            raise ModelError("a6 must be zero")
        if np.hypot(a[2], np.sin(alpha[2]) * d[3]) <= 0:
            raise ModelError("forearm has zero length")

    def base_transform(self, slide: float) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.base_rotation
        T[:3, 3] = self.rail_origin + slide * self.rail_axis
        return T

    def within_limits(self, q) -> np.ndarray:
        q = np.asarray(q)
        return np.all((q >= self.q_min) & (q <= self.q_max), axis=-1)

    def rebased(self, rotation: np.ndarray, translation=np.zeros(3)) -> "RobotModel":
        """The same robot after a rigid motion of the world frame."""
        rotation = np.asarray(rotation, dtype=float)
        return RobotModel(
            rail_axis=rotation @ self.rail_axis,
            rail_origin=rotation @ self.rail_origin + translation,
            dh=self.dh, tool=self.tool, q_min=self.q_min, q_max=self.q_max,
            qd_max=self.qd_max, link_shapes=self.link_shapes,
            base_rotation=rotation @ self.base_rotation,
        )

    def to_dict(self) -> dict:
        return {
            "rail": {"axis": self.rail_axis.tolist(), "origin": self.rail_origin.tolist(),
                     "rotation": self.base_rotation.tolist()},
            "dh": [dict(zip(("a", "alpha", "d", "theta_offset"), row)) for row in self.dh.tolist()],
            "tool": self.tool.tolist(),
            "limits": {"q_min": self.q_min.tolist(), "q_max": self.q_max.tolist(),
                       "qd_max": self.qd_max.tolist()},
            "shapes": [[s.to_dict() for s in link] for link in self.link_shapes],
        }


def robot_from_dict(data: dict) -> RobotModel:
    try:
        rail = data["rail"]
        dh_rows = []
        for row in data["dh"]:
            if isinstance(row, dict):
                dh_rows.append([row["a"], row["alpha"], row["d"], row.get("theta_offset", 0.0)])
            else:
                dh_rows.append(list(row))
        tool = np.asarray(data.get("tool", np.eye(4)), dtype=float)
        if tool.shape == (16,):
            tool = tool.reshape(4, 4)
        limits = data["limits"]
        shapes = [[shape_from_dict(s) for s in link] for link in data.get("shapes", [])]
        return RobotModel(
            rail_axis=rail["axis"], rail_origin=rail["origin"],
            base_rotation=rail.get("rotation", np.eye(3)),
            dh=dh_rows, tool=tool,
            q_min=limits["q_min"], q_max=limits["q_max"], qd_max=limits["qd_max"],
            link_shapes=shapes,
        )
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed robot description: {exc}") from exc


def load_robot(path: str | Path) -> RobotModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read robot file {path}: {exc}") from exc
    return robot_from_dict(data)


def default_model() -> RobotModel:
    """Generic 35 kg-class spherical-wrist arm on a +-2.1 m rail."""
    text = resources.files("redunplan.data").joinpath("default_robot.json").read_text("utf-8")
    return robot_from_dict(json.loads(text))


# ---------------------------------------------------------------- kinematics

def dh_matrices(dh: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Stack of link transforms for joint angles ``theta`` of shape (..., 6)."""
    a, alpha, d, offset = dh.T
    th = theta + offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(alpha), np.sin(alpha)
    A = np.zeros(th.shape + (4, 4))
    A[..., 0, 0] = ct
    A[..., 0, 1] = -st * ca
    A[..., 0, 2] = st * sa
    A[..., 0, 3] = a * ct
    A[..., 1, 0] = st
    A[..., 1, 1] = ct * ca
    A[..., 1, 2] = -ct * sa
    A[..., 1, 3] = a * st
    A[..., 2, 1] = sa
    A[..., 2, 2] = ca
    A[..., 2, 3] = d
    A[..., 3, 3] = 1.0
    return A


def link_frames(model: RobotModel, q) -> np.ndarray:
    """World frames of links 0..6 for joint vectors of shape (..., 7).

    Frame 0 is the arm base on the carriage, frame k the distal DH frame of
    arm link k.  Returns shape (..., 7, 4, 4).
    """
    q = np.asarray(q, dtype=float)
    A = dh_matrices(model.dh, q[..., :6])
    frames = np.empty(q.shape[:-1] + (N_LINKS, 4, 4))
    base = np.zeros(q.shape[:-1] + (4, 4))
    base[..., :3, :3] = model.base_rotation
    base[..., :3, 3] = model.rail_origin + q[..., SLIDE, None] * model.rail_axis
    base[..., 3, 3] = 1.0
    frames[..., 0, :, :] = base
    T = base
    for k in range(6):
        T = T @ A[..., k, :, :]
        frames[..., k + 1, :, :] = T
    return frames


def tool_frames(model: RobotModel, q) -> np.ndarray:
    return link_frames(model, q)[..., 6, :, :] @ model.tool


def forward_kinematics(model: RobotModel, q) -> TaskPose:
    T = tool_frames(model, np.asarray(q, dtype=float))
    return TaskPose(T[:3, 3], T[:3, :3])


def jacobian_world(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian (linear; angular) in world axes, shape (..., 6, 7)."""
    frames = link_frames(model, q)
    p_tool = (frames[..., 6, :, :] @ model.tool)[..., :3, 3]
    shape = frames.shape[:-3]
    J = np.zeros(shape + (6, N_JOINTS))
    for k in range(6):
        z = frames[..., k, :3, 2]
        o = frames[..., k, :3, 3]
        J[..., :3, k] = np.cross(z, p_tool - o)
        J[..., 3:, k] = z
    J[..., :3, SLIDE] = model.rail_axis
    return J


def jacobian_ee(model: RobotModel, q) -> np.ndarray:
    """Jacobian mapping joint rates to tool-frame (linear, angular) velocity."""
    q = np.asarray(q, dtype=float)
    J = jacobian_world(model, q)
    R = tool_frames(model, q)[..., :3, :3]
    Rt = np.swapaxes(R, -1, -2)
    out = np.empty_like(J)
    out[..., :3, :] = Rt @ J[..., :3, :]
    out[..., 3:, :] = Rt @ J[..., 3:, :]
    return out


# ---------------------------------------------------------------- orientation

def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def euler_to_rotation(phi) -> np.ndarray:
    """ZYZ Euler angles to a rotation matrix: Rz(phi1) Ry(phi2) Rz(phi3)."""
    a, b, c = phi
    return rot_z(a) @ rot_y(b) @ rot_z(c)


def rotation_to_euler(R, strict: bool = False, tol: float = 1e-9) -> np.ndarray:
    """ZYZ Euler angles of ``R`` with the middle angle in [0, pi].

    When the middle angle is within ``tol`` of 0 or pi only the sum (or
    difference) of the outer angles is defined; the third angle is then set to
    zero, or RepresentationSingularity is raised if ``strict``.
    """
    R = np.asarray(R, dtype=float)
    s2 = np.hypot(R[0, 2], R[1, 2])
    theta = np.arctan2(s2, R[2, 2])
    if theta < tol or np.pi - theta < tol:
        if strict:
            raise RepresentationSingularity(f"ZYZ middle angle {theta:.3e} is degenerate")
        if R[2, 2] > 0:
            return np.array([np.arctan2(R[1, 0], R[0, 0]), 0.0, 0.0])
        return np.array([np.arctan2(-R[1, 0], -R[0, 0]), np.pi, 0.0])
    return np.array([np.arctan2(R[1, 2], R[0, 2]), theta, np.arctan2(R[2, 1], -R[2, 0])])
