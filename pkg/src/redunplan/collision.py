"""Intersection predicates for posed primitives and whole-robot collision checks.

Every routine is vectorised over a leading batch axis so the grid builder can
test thousands of configurations at once; the scalar API wraps batches of one.
Round shapes (spheres, capsules) are reduced to a segment plus a radius.
Touching shapes count as intersecting.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelError
from .kinematics import RobotModel, link_frames
from .shapes import Box, Capsule, Shape, Sphere, inflate, shape_from_dict

_EPS = 1e-30


@dataclass(frozen=True, eq=False)
class Scene:
    static_shapes: tuple[Shape, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "static_shapes", tuple(self.static_shapes))

    def transformed(self, rotation, translation=np.zeros(3)) -> "Scene":
        T = np.eye(4)
        T[:3, :3] = rotation
        T[:3, 3] = translation
        return Scene(tuple(transform_shape(s, T) for s in self.static_shapes))

    def to_dict(self) -> dict:
        return {"shapes": [s.to_dict() for s in self.static_shapes]}


def scene_from_dict(data: dict) -> Scene:
    try:
        return Scene(tuple(shape_from_dict(s) for s in data.get("shapes", [])))
    except AttributeError as exc:
        raise ModelError(f"malformed scene: {exc}") from exc


def load_scene(path: str | Path) -> Scene:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read scene file {path}: {exc}") from exc
    return scene_from_dict(data)


def transform_shape(shape: Shape, T: np.ndarray) -> Shape:
    R, t = T[:3, :3], T[:3, 3]
    if isinstance(shape, Sphere):
        return Sphere(R @ shape.center + t, shape.radius)
    if isinstance(shape, Capsule):
        return Capsule(R @ shape.p0 + t, R @ shape.p1 + t, shape.radius)
    return Box(R @ shape.center + t, shape.half_extents, R @ shape.rotation)


# ------------------------------------------------------------ posed primitives

@dataclass
class _Round:
    p0: np.ndarray  # (M, 3)
    p1: np.ndarray
    r: float


@dataclass
class _Box:
    c: np.ndarray  # (M, 3)
    R: np.ndarray  # (M, 3, 3)
    h: np.ndarray  # (3,)


def _pose(shape: Shape, frames: np.ndarray):
    """Place a shape defined in a link frame; ``frames`` has shape (M, 4, 4)."""
    R, t = frames[:, :3, :3], frames[:, :3, 3]
    if isinstance(shape, Sphere):
        c = R @ shape.center + t
        return _Round(c, c, shape.radius)
    if isinstance(shape, Capsule):
        return _Round(R @ shape.p0 + t, R @ shape.p1 + t, shape.radius)
    return _Box(R @ shape.center + t, R @ shape.rotation, shape.half_extents)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def segment_distance2(p0, p1, q0, q1) -> np.ndarray:
    """Squared distance between segments [p0, p1] and [q0, q1] (batched)."""
    p0, p1, q0, q1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p0, p1, q0, q1)))
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    f = _dot(d2, r)
    c = _dot(d1, r)
    b = _dot(d1, d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = a * e - b * b
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = np.where(e > _EPS, (b * s + f) / e, 0.0)
        # t outside [0, 1]: clamp it and recompute s
        s_lo = np.where(a > _EPS, np.clip(-c / a, 0.0, 1.0), 0.0)
        s_hi = np.where(a > _EPS, np.clip((b - c) / a, 0.0, 1.0), 0.0)
    s = np.where(t < 0, s_lo, np.where(t > 1, s_hi, s))
    t = np.clip(t, 0.0, 1.0)
    point_b = e <= _EPS
    s = np.where(point_b, s_lo, s)
    t = np.where(point_b, 0.0, t)
    # degenerate first segment (a point): only t matters
    point_a = a <= _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_pt = np.where(e > _EPS, np.clip(f / e, 0.0, 1.0), 0.0)
    s = np.where(point_a, 0.0, s)
    t = np.where(point_a, t_pt, t)
    diff = (p0 + d1 * s[..., None]) - (q0 + d2 * t[..., None])
    return _dot(diff, diff)


def _point_box_distance2(p_local, h):
    excess = np.maximum(np.abs(p_local) - h, 0.0)
    return _dot(excess, excess)


def _to_local(points, box: _Box):
    return np.einsum("...ji,...j->...i", box.R, points - box.c)


def _segment_hits_box(a, b, h):
    """Slab test for local-frame segments [a, b] against the box [-h, h]."""
    d = b - a
    t_lo = np.zeros(a.shape[:-1])
    t_hi = np.ones(a.shape[:-1])
    inside = np.ones(a.shape[:-1], dtype=bool)
    for k in range(3):
        dk, ak = d[..., k], a[..., k]
        zero = dk == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h[k] - ak) / dk
            t2 = (h[k] - ak) / dk
        lo = np.where(zero, -np.inf, np.minimum(t1, t2))
        hi = np.where(zero, np.inf, np.maximum(t1, t2))
        inside &= ~zero | (np.abs(ak) <= h[k])
        t_lo = np.maximum(t_lo, lo)
        t_hi = np.minimum(t_hi, hi)
    return inside & (t_lo <= t_hi)


def _box_edges(h):
    edges = []
    for k in range(3):
        i, j = [x for x in range(3) if x != k]
        for si, sj in itertools.product((-1.0, 1.0), repeat=2):
            p = np.zeros(3)
            p[i], p[j] = si * h[i], sj * h[j]
            q = p.copy()
            p[k], q[k] = -h[k], h[k]
            edges.append((p, q))
    return edges


def segment_box_distance2(round_: _Round, box: _Box) -> np.ndarray:
    a = _to_local(round_.p0, box)
    b = _to_local(round_.p1, box)
    a, b = np.broadcast_arrays(a, b)
    hit = _segment_hits_box(a, b, box.h)
    best = np.minimum(_point_box_distance2(a, box.h), _point_box_distance2(b, box.h))
    for e0, e1 in _box_edges(box.h):
        best = np.minimum(best, segment_distance2(a, b, e0, e1))
    return np.where(hit, 0.0, best)


def _box_box_overlap(A: _Box, B: _Box) -> np.ndarray:
    """Separating-axis test over the 15 candidate axes."""
    axes_a = np.swapaxes(A.R, -1, -2)  # rows are world axis vectors
    axes_b = np.swapaxes(B.R, -1, -2)
    axes_a, axes_b = np.broadcast_arrays(axes_a, axes_b)
    t = B.c - A.c
    t = np.broadcast_to(t, axes_a.shape[:-2] + (3,))
    candidates = [axes_a[..., k, :] for k in range(3)] + [axes_b[..., k, :] for k in range(3)]
    for i in range(3):
        for j in range(3):
            candidates.append(np.cross(axes_a[..., i, :], axes_b[..., j, :]))
    overlap = np.ones(t.shape[:-1], dtype=bool)
    for L in candidates:
        usable = _dot(L, L) > 1e-20
        ra = sum(A.h[k] * np.abs(_dot(axes_a[..., k, :], L)) for k in range(3))
        rb = sum(B.h[k] * np.abs(_dot(axes_b[..., k, :], L)) for k in range(3))
        separated = usable & (np.abs(_dot(t, L)) > ra + rb)
        overlap &= ~separated
    return overlap


def _posed_intersect(a, b) -> np.ndarray:
    if isinstance(a, _Round) and isinstance(b, _Round):
        d2 = segment_distance2(a.p0, a.p1, b.p0, b.p1)
        return d2 <= (a.r + b.r) ** 2
    if isinstance(a, _Box) and isinstance(b, _Box):
        return _box_box_overlap(a, b)
    if isinstance(a, _Box):
        a, b = b, a
    return segment_box_distance2(a, b) <= a.r ** 2


def shapes_intersect(a: Shape, pose_a, b: Shape, pose_b) -> bool:
    """True iff shape ``a`` placed at ``pose_a`` overlaps ``b`` at ``pose_b``."""
    Ta = np.asarray(pose_a, dtype=float)[None]
    Tb = np.asarray(pose_b, dtype=float)[None]
    return bool(_posed_intersect(_pose(a, Ta), _pose(b, Tb))[0])


# ------------------------------------------------------------ robot checks

def self_collision_pairs(n_links: int) -> list[tuple[int, int]]:
    """Link pairs tested for self collision; consecutive links are exempt."""
    return [(i, j) for i in range(n_links) for j in range(i + 2, n_links)]


@dataclass
class _PosedRobot:
    links: list = field(default_factory=list)  # per link, list of posed shapes


def _pose_robot(model: RobotModel, Q: np.ndarray, margin: float) -> _PosedRobot:
    frames = link_frames(model, Q)
    links = []
    for k, shapes in enumerate(model.link_shapes):
        links.append([_pose(inflate(s, margin), frames[:, k]) for s in shapes])
    return _PosedRobot(links)


def _pair_hits(sa, sb, n):
    hit = np.zeros(n, dtype=bool)
    for x in sa:
        for y in sb:
            hit |= _posed_intersect(x, y)
    return hit


def collision_mask(model: RobotModel, scene: Scene | None, Q, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of colliding configurations for a batch ``Q`` (M, 7)."""
    Q = np.asarray(Q, dtype=float).reshape(-1, 7)
    n = Q.shape[0]
    posed = _pose_robot(model, Q, margin)
    hit = np.zeros(n, dtype=bool)
    for i, j in self_collision_pairs(len(posed.links)):
        hit |= _pair_hits(posed.links[i], posed.links[j], n)
    if scene is not None:
        world = np.eye(4)[None]
        env = [_pose(inflate(s, margin), world) for s in scene.static_shapes]
        for shapes in posed.links:
            for e in env:
                hit |= _pair_hits(shapes, [e], n)
    return hit


def collision_pairs(model: RobotModel, scene: Scene | None = None) -> list[tuple]:
    """Every pair identity :func:`config_in_collision` examines, in test order."""
    pairs = [("self", i, j) for i, j in self_collision_pairs(len(model.link_shapes))]
    if scene is not None:
        pairs += [("env", k, e) for k in range(len(model.link_shapes))
                  for e in range(len(scene.static_shapes))]
    return pairs


def config_in_collision(model: RobotModel, scene: Scene | None, q,
                        margin: float = 0.0) -> tuple[bool, tuple | None]:
    """Collision verdict for one configuration and the first offending pair.

    Pairs are reported as ``("self", link_a, link_b)`` or
    ``("env", link, scene_shape_index)``; link 6 is the tool link.
    """
    q = np.asarray(q, dtype=float).reshape(1, 7)
    posed = _pose_robot(model, q, margin)
    world = np.eye(4)[None]
    env = ([_pose(inflate(s, margin), world) for s in scene.static_shapes]
           if scene is not None else [])
    for kind, a, b in collision_pairs(model, scene):
        if kind == "self":
            hit = _pair_hits(posed.links[a], posed.links[b], 1)
        else:
            hit = _pair_hits(posed.links[a], [env[b]], 1)
        if hit[0]:
            return True, (kind, a, b)
    return False, None


def default_scene() -> Scene:
    """The bundled drilling cell: a vertical panel in front of the rail and its jig."""
    from importlib import resources

    text = resources.files("redunplan.data").joinpath("default_scene.json").read_text(encoding="utf-8")
    return scene_from_dict(json.loads(text))
