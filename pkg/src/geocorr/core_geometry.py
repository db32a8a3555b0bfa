"""Point clouds and rigid transforms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import as_points, frozen
from .errors import PreconditionError

ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points (meters) with optional per-point attributes.

    Arrays are copied and made read-only on construction.
    """

    points: np.ndarray
    intensity: Optional[np.ndarray] = None
    ground_prob: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = as_points(self.points)
        object.__setattr__(self, "points", frozen(pts))
        n = len(pts)
        for name in ("intensity", "ground_prob"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=np.float64).reshape(-1)
            if len(arr) != n:
                raise PreconditionError(
                    f"{name} has length {len(arr)}, expected {n}")
            if name == "ground_prob" and n and (arr.min() < 0 or arr.max() > 1):
                raise PreconditionError("ground_prob must lie in [0, 1]")
            object.__setattr__(self, name, frozen(arr))

    def __len__(self):
        return len(self.points)

    @property
    def is_annotated(self):
        return self.ground_prob is not None

    def subset(self, index):
        """Return the cloud restricted to ``index`` (mask or integer array)."""
        pick = lambda a: None if a is None else a[index]
        return PointCloud(self.points[index], pick(self.intensity),
                          pick(self.ground_prob))

    def with_ground_prob(self, ground_prob):
        return PointCloud(self.points, self.intensity, ground_prob)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) element: ``p' = rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise PreconditionError("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise PreconditionError("transform contains non-finite values")
        if (np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL
                or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL):
            raise PreconditionError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", frozen(R))
        object.__setattr__(self, "translation", frozen(t))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        """Build from a 3x4 ``[R|t]`` or 4x4 homogeneous matrix."""
        M = np.asarray(matrix, dtype=np.float64)
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def from_yaw(cls, yaw, translation=(0.0, 0.0, 0.0)):
        """Rotation about +z by ``yaw`` radians."""
        c, s = np.cos(yaw), np.sin(yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(R, np.asarray(translation, dtype=np.float64))

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def __matmul__(self, other):
        return compose(self, other)

    def allclose(self, other, atol=1e-9):
        return (np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
                and np.allclose(self.translation, other.translation,
                                atol=atol, rtol=0))


@dataclass(frozen=True)
class SequenceMeta:
    scan_paths: tuple
    poses: tuple

    def __post_init__(self):
        object.__setattr__(self, "scan_paths", tuple(self.scan_paths))
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.scan_paths) != len(self.poses):
            raise PreconditionError(
                f"{len(self.scan_paths)} scans but {len(self.poses)} poses")

    def __len__(self):
        return len(self.scan_paths)


def transform_cloud(cloud, T):
    return PointCloud(T.apply(cloud.points), cloud.intensity, cloud.ground_prob)


def compose(T1, T2):
    """Apply ``T2`` first, then ``T1``."""
    R = T1.rotation @ T2.rotation
    t = T1.rotation @ T2.translation + T1.translation
    return RigidTransform(orthonormalize(R), t)


def invert(T):
    Rt = T.rotation.T
    return RigidTransform(Rt.copy(), -Rt @ T.translation)


def orthonormalize(R):
    """Project a near-rotation matrix back onto SO(3)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def random_transform(rng, max_angle=np.pi, max_translation=1.0):
    """Random rigid transform with an axis-angle rotation up to ``max_angle``."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
    t = rng.uniform(-max_translation, max_translation, size=3)
    return RigidTransform(orthonormalize(R), t)
