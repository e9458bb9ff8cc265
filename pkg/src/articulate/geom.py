"""Joint parameterization and rigid-motion kernels.

Angles are radians everywhere in this module; conversion to degrees happens
only where results are reported.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateVectorError, NormalizationError

UNIT_TOL = 1e-6


class JointType(enum.IntEnum):
    REVOLUTE = 0
    PRISMATIC = 1


@dataclass(frozen=True)
class JointParams:
    """Joint type, a point on the axis, the unit axis direction and the state.

    ``state`` is radians for revolute joints and meters for prismatic ones,
    measured from the fully closed configuration. For prismatic joints
    ``position`` is the closed-state centroid of the movable part.
    """

    joint_type: JointType
    position: np.ndarray
    orientation: np.ndarray
    state: float

    def __post_init__(self):
        object.__setattr__(self, "joint_type", JointType(self.joint_type))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(3))
        object.__setattr__(self, "state", float(self.state))

    @property
    def is_revolute(self) -> bool:
        return self.joint_type == JointType.REVOLUTE

    def with_state(self, state: float) -> "JointParams":
        return replace(self, state=float(state))

    def transformed(self, t: "RigidTransform") -> "JointParams":
        """The same joint expressed in the frame ``t`` maps into."""
        R, p = t.rotation, t.translation
        return replace(self, position=R @ self.position + p, orientation=R @ self.orientation)


@dataclass(frozen=True)
class RigidTransform:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"rigid transform must be 4x4, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_rt(cls, rotation, translation) -> "RigidTransform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(4))

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform.from_rt(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(self.matrix @ other.matrix)


def _require_unit(v: np.ndarray, what: str, tol: float = UNIT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if not abs(n - 1.0) <= tol:
        raise NormalizationError(f"{what} must be unit length (|{what}| = {n:.9g})")
    return v


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(axis, angle: float) -> np.ndarray:
    """Rotation by ``angle`` radians about the unit vector ``axis``."""
    k = _require_unit(axis, "axis")
    K = skew(k)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def manipulation_matrix(joint: JointParams, command: float) -> RigidTransform:
    """Rigid motion that drives ``joint`` from its current state to ``command``.

    Revolute joints rotate about the line through ``joint.position`` along
    ``joint.orientation``; prismatic joints translate along the orientation.
    """
    u = _require_unit(joint.orientation, "orientation")
    dv = float(command) - joint.state
    if joint.is_revolute:
        R = rodrigues(u, dv)
        T = (np.eye(3) - R) @ joint.position
    else:
        R = np.eye(3)
        T = dv * u
    return RigidTransform.from_rt(R, T)


def as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"point cloud must be Nx3, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("point cloud is empty")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud has non-finite coordinates")
    return pts


def apply_transform(t: RigidTransform, points) -> np.ndarray:
    pts = as_cloud(points)
    return pts @ t.rotation.T + t.translation


def angle_between(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("angle_between needs non-zero vectors")
    c = float(np.dot(a, b) / (na * nb))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def point_to_axis_distance(p, axis_point, axis_dir) -> float:
    d = _require_unit(axis_dir, "axis_dir")
    diff = np.asarray(p, dtype=float) - np.asarray(axis_point, dtype=float)
    return float(np.linalg.norm(np.cross(diff, d)))


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """World-to-camera transform for a camera at ``eye`` facing ``target``.

    Camera axes follow the pinhole convention: x right, y down, z forward.
    """
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=float))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])
    return RigidTransform.from_rt(R, -R @ eye)
