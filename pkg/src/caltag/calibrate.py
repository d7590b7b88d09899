"""2-D rigid extrinsic estimation (Kabsch) and calibration error metrics."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class DegenerateFitWarning(UserWarning):
    """The correspondences do not pin down a unique proper rotation."""


@dataclass(frozen=True)
class Transform2D:
    """Rigid map p -> R p + t (radar frame to LiDAR frame in this package)."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(2, 2)
        t = np.asarray(self.t, dtype=np.float64).reshape(2)
        if not np.allclose(R.T @ R, np.eye(2), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R must be a proper rotation")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Transform2D":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, angle_deg: float, t=(0.0, 0.0)) -> "Transform2D":
        a = math.radians(angle_deg)
        c, s = math.cos(a), math.sin(a)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(t, dtype=np.float64))

    @property
    def angle_deg(self) -> float:
        return math.degrees(math.atan2(self.R[1, 0], self.R[0, 0]))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.R.T + self.t

    def inverse(self) -> "Transform2D":
        return Transform2D(self.R.T, -self.R.T @ self.t)

    def __matmul__(self, other: "Transform2D") -> "Transform2D":
        """Composition: (self @ other).apply(p) == self.apply(other.apply(p))."""
        return Transform2D(self.R @ other.R, self.R @ other.t + self.t)

    def homogeneous(self) -> np.ndarray:
        H = np.eye(3)
        H[:2, :2] = self.R
        H[:2, 2] = self.t
        return H

    @classmethod
    def from_homogeneous(cls, H) -> "Transform2D":
        H = np.asarray(H, dtype=np.float64).reshape(3, 3)
        return cls(H[:2, :2], H[:2, 2])

    def to_record(self, **extra) -> str:
        """One JSON line holding the row-major 3x3 homogeneous matrix."""
        rec = {"matrix": [float(v) for v in self.homogeneous().ravel()], **extra}
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_record(cls, line: str) -> "Transform2D":
        return cls.from_homogeneous(json.loads(line)["matrix"])


@dataclass(frozen=True)
class Correspondences:
    """Positionally paired radar and LiDAR fiducial points, each [N x 2]."""

    radar_points: np.ndarray
    lidar_points: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.radar_points, dtype=np.float64).reshape(-1, 2)
        p = np.asarray(self.lidar_points, dtype=np.float64).reshape(-1, 2)
        if q.shape != p.shape:
            raise ValueError("radar and lidar point lists must have equal length")
        if len(q) < 1:
            raise ValueError("need at least one correspondence")
        object.__setattr__(self, "radar_points", q)
        object.__setattr__(self, "lidar_points", p)

    def __len__(self) -> int:
        return len(self.radar_points)

    def subset(self, idx: Iterable[int]) -> "Correspondences":
        idx = list(idx)
        return Correspondences(self.radar_points[idx], self.lidar_points[idx])


def polar_to_cartesian(r, theta_deg) -> np.ndarray:
    """(r, theta) -> (r cos theta, r sin theta); theta from boresight, CCW positive.

    Works elementwise; scalar inputs give a length-2 array, arrays give [N x 2].
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("range must be non-negative")
    th = np.deg2rad(np.asarray(theta_deg, dtype=np.float64))
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def cartesian_to_polar(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=np.float64)
    return np.hypot(p[..., 0], p[..., 1]), np.rad2deg(np.arctan2(p[..., 1], p[..., 0]))


def kabsch_2d(c: Correspondences) -> Transform2D:
    """Least-squares proper rigid transform taking radar points onto LiDAR points.

    W = sum q'_i^T p'_i = U D V^T, R = V diag(1, d) U^T with d = sign(det(V U^T)),
    t = mu_L - R mu_R. Issues :class:`DegenerateFitWarning` and falls back to the
    identity rotation when the data cannot fix the rotation.
    """
    if len(c) < 2:
        raise ValueError("kabsch_2d needs at least two correspondences")
    q, p = c.radar_points, c.lidar_points
    mu_r, mu_l = q.mean(axis=0), p.mean(axis=0)
    qc, pc = q - mu_r, p - mu_l
    W = qc.T @ pc
    U, D, Vt = np.linalg.svd(W)
    V = Vt.T
    d = 1.0 if np.linalg.det(V @ U.T) >= 0 else -1.0
    scale = max(np.abs(qc).max(), np.abs(pc).max(), 1e-300)
    tol = 1e-12 * scale**2 * len(c)

    if D[0] <= tol:
        warnings.warn("correspondences are coincident; rotation undetermined", DegenerateFitWarning, stacklevel=2)
        R = np.eye(2)
    else:
        if d < 0 and D[0] - D[1] <= tol:
            warnings.warn("reflection-symmetric correspondences; rotation ambiguous", DegenerateFitWarning, stacklevel=2)
        R = V @ np.diag([1.0, d]) @ U.T
        # re-orthonormalise against rounding so the Transform2D invariants hold
        a = math.atan2(R[1, 0] - R[0, 1], R[0, 0] + R[1, 1])
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    return Transform2D(R, mu_l - R @ mu_r)


def calibration_sse(T: Transform2D, c: Correspondences) -> float:
    """Sum of squared residuals ||p_k - T q_k||^2."""
    r = c.lidar_points - T.apply(c.radar_points)
    return float(np.sum(r * r))


def calibration_rmse(T: Transform2D, c: Correspondences) -> float:
    """Root-mean-square residual distance in metres."""
    return math.sqrt(calibration_sse(T, c) / len(c))
