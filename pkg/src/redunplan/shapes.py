"""Collision primitives and their JSON representation.

Shapes are expressed in the frame of their owner (a robot link or the world).
A sphere is handled internally as a capsule whose two end points coincide.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError


def _vec3(value, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} must be a finite 3-vector, got {value!r}")
    return arr


def _rotation(value, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3, 3):
        raise ModelError(f"{name} must be a 3x3 matrix")
    if np.abs(arr.T @ arr - np.eye(3)).max() > 1e-9 or np.linalg.det(arr) < 0:
        raise ModelError(f"{name} is not a rotation matrix")
    return arr


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        if not self.radius > 0:
            raise ModelError("sphere radius must be positive")

    kind = "sphere"

    def to_dict(self) -> dict:
        return {"kind": "sphere", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", _vec3(self.p0, "capsule p0"))
        object.__setattr__(self, "p1", _vec3(self.p1, "capsule p1"))
        if not self.radius > 0:
            raise ModelError("capsule radius must be positive")

    kind = "capsule"

    def to_dict(self) -> dict:
        return {"kind": "capsule", "p0": self.p0.tolist(), "p1": self.p1.tolist(),
                "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "box center"))
        h = _vec3(self.half_extents, "box half_extents")
        if not np.all(h > 0):
            raise ModelError("box half extents must be positive")
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "rotation", _rotation(self.rotation, "box rotation"))

    kind = "box"

    def to_dict(self) -> dict:
        return {"kind": "box", "center": self.center.tolist(),
                "half_extents": self.half_extents.tolist(),
                "rotation": self.rotation.tolist()}


Shape = Sphere | Capsule | Box


def shape_from_dict(data: dict) -> Shape:
    try:
        kind = data["kind"]
        if kind == "sphere":
            return Sphere(data["center"], float(data["radius"]))
        if kind == "capsule":
            return Capsule(data["p0"], data["p1"], float(data["radius"]))
        if kind == "box":
            return Box(data["center"], data["half_extents"], data.get("rotation", np.eye(3)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed shape entry {data!r}: {exc}") from exc
    raise ModelError(f"unknown shape kind {data.get('kind')!r}")


def inflate(shape: Shape, margin: float) -> Shape:
    """Grow a shape by ``margin`` (radius for round shapes, half extents for boxes)."""
    if margin == 0:
        return shape
    if isinstance(shape, Sphere):
        return Sphere(shape.center, shape.radius + margin)
    if isinstance(shape, Capsule):
        return Capsule(shape.p0, shape.p1, shape.radius + margin)
    return Box(shape.center, shape.half_extents + margin, shape.rotation)
