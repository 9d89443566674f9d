"""Force ellipsoids and the Manipulator Mechanical Advantage (MMA).

For a unit-norm joint torque ball the end-effector forces satisfy
``f^T J J^T f <= 1``.  The MMA along a direction ``eta`` is the distance from
the ellipsoid centre to its surface along ``eta``: ``(eta^T J J^T eta)^-1/2``.
J is the tool-frame Jacobian, so both quantities are independent of where the
robot sits in the world.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularConfiguration
from .kinematics import RobotModel, jacobian_ee

ETA_Z = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
MMA_SINGULAR = 1e-14
ELLIPSOID_RCOND = 1e-12


def force_matrix(model: RobotModel, q, weights=None) -> np.ndarray:
    """``J W J^T`` with per-joint compliance weights ``W`` (identity by default)."""
    J = jacobian_ee(model, q)
    if weights is None:
        return J @ np.swapaxes(J, -1, -2)
    return (J * np.asarray(weights, dtype=float)) @ np.swapaxes(J, -1, -2)


def mma_from_matrix(A, eta=ETA_Z) -> float:
    eta = np.asarray(eta, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.shape[0] != eta.shape[0]:
        A_eta = eta[:A.shape[0]]
        value = A_eta @ A @ A_eta
    else:
        value = eta @ A @ eta
    if not value > MMA_SINGULAR:
        raise SingularConfiguration(f"eta^T J J^T eta = {value:.3e}: no force transmission margin")
    return float(value ** -0.5)


def mma(model: RobotModel, q, eta=ETA_Z, weights=None) -> float:
    return mma_from_matrix(force_matrix(model, q, weights), eta)


def mma_batch(model: RobotModel, Q, eta=ETA_Z, weights=None) -> np.ndarray:
    """MMA for many configurations; singular entries come back as NaN."""
    A = force_matrix(model, np.asarray(Q, dtype=float), weights)
    eta = np.asarray(eta, dtype=float)
    value = np.einsum("i,...ij,j->...", eta, A, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(value > MMA_SINGULAR, value ** -0.5, np.nan)


@dataclass
class ForceEllipsoid:
    axes: np.ndarray  # rows are unit eigenvectors, longest semi-axis first
    eigenvalues: np.ndarray
    semi_axis_lengths: np.ndarray
    mma: float

    def matrix(self) -> np.ndarray:
        return ellipsoid_matrix(self.axes, self.semi_axis_lengths)

    def to_dict(self) -> dict:
        names = ("major", "middle", "minor")
        return {
            "frame": "tool",
            "axes": [{"name": n, "x": float(v[0]), "y": float(v[1]), "z": float(v[2]),
                      "length": float(length)}
                     for n, v, length in zip(names, self.axes, self.semi_axis_lengths)],
            "mma": float(self.mma),
        }


def ellipsoid_matrix(axes, lengths) -> np.ndarray:
    """Rebuild the translational block ``sum_k v_k v_k^T / len_k^2``."""
    axes = np.asarray(axes, dtype=float)
    lam = 1.0 / np.asarray(lengths, dtype=float) ** 2
    return np.einsum("k,ki,kj->ij", lam, axes, axes)


def decompose(A3, direction=(0.0, 0.0, 1.0)) -> ForceEllipsoid:
    """Eigen-decomposition of a symmetric positive-definite 3x3 force matrix."""
    A3 = np.asarray(A3, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (A3 + A3.T))
    if not lam[0] > ELLIPSOID_RCOND * lam[-1]:
        raise SingularConfiguration("force ellipsoid is degenerate")
    axes = vec.T  # ascending eigenvalue = descending semi-axis length
    for k in range(3):
        first = axes[k][np.flatnonzero(np.abs(axes[k]) > 1e-12)[0]]
        if first < 0:
            axes[k] = -axes[k]
    direction = np.asarray(direction, dtype=float)
    mma_value = mma_from_matrix(A3, direction)
    return ForceEllipsoid(axes=axes, eigenvalues=lam, semi_axis_lengths=lam ** -0.5,
                          mma=mma_value)


def force_ellipsoid(model: RobotModel, q, weights=None) -> ForceEllipsoid:
    return decompose(force_matrix(model, q, weights)[:3, :3])


def select_stiffest(model: RobotModel, candidates, eta=ETA_Z, weights=None):
    """Candidate with the largest MMA; the earliest candidate wins ties.

    Returns ``(index, q, mma)``.  Singular candidates are skipped.
    """
    best, best_value = None, -np.inf
    for idx, q in enumerate(candidates):
        try:
            value = mma(model, q, eta, weights)
        except SingularConfiguration:
            continue
        if value > best_value:
            best, best_value = idx, value
    if best is None:
        raise SingularConfiguration("every candidate configuration is singular along eta")
    return best, np.asarray(candidates[best]), best_value
