"""Synthetic LiDAR scans, bird's-eye-view projection and DBSCAN fiducial extraction."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree


class FiducialNotFoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class WallSegment:
    """A straight background structure between two BEV points, seen over a height span."""

    start: tuple[float, float]
    end: tuple[float, float]
    z_lo: float = -0.8
    z_hi: float = 1.5


@dataclass
class Cluster:
    indices: np.ndarray
    centroid: np.ndarray
    std_x: float
    std_y: float

    @property
    def size(self) -> int:
        return int(self.indices.size)


def simulate_lidar_scan(
    fiducial_xy,
    rng: np.random.Generator,
    *,
    noise_std_m: float = 0.01,
    n_fiducial_points: int = 40,
    fiducial_size_m: float = 0.1,
    walls: Sequence[WallSegment] = (),
    wall_point_spacing_m: float = 0.05,
    wall_row_spacing_m: float = 0.15,
    n_background_points: int = 0,
    background_extent_m: float = 15.0,
    include_ground: bool = True,
    sensor_height_m: float = 0.0,
) -> np.ndarray:
    """Point cloud [P x 3] of the fiducial plus background structures, in the LiDAR frame.

    The fiducial is a tight Gaussian blob (std = size/4) at sensor height.
    Walls are planes sampled every ``wall_point_spacing_m`` along their
    length and every ``wall_row_spacing_m`` in height. All points receive Gaussian noise along the sensor ray.
    """
    fx, fy = float(fiducial_xy[0]), float(fiducial_xy[1])
    spread = fiducial_size_m / 4.0
    blob = np.column_stack(
        [
            fx + spread * rng.standard_normal(n_fiducial_points),
            fy + spread * rng.standard_normal(n_fiducial_points),
            sensor_height_m + spread * rng.standard_normal(n_fiducial_points),
        ]
    )
    parts = [blob]
    for wall in walls:
        a, b = np.asarray(wall.start, float), np.asarray(wall.end, float)
        length = float(np.linalg.norm(b - a))
        n = max(int(length / wall_point_spacing_m) + 1, 2)
        s = np.linspace(0.0, 1.0, n)
        xy = a[None, :] + s[:, None] * (b - a)[None, :]
        for z in np.arange(wall.z_lo, wall.z_hi + 1e-9, wall_row_spacing_m):
            parts.append(np.column_stack([xy, np.full(n, z)]))
    if n_background_points:
        r = rng.uniform(0.5, background_extent_m, n_background_points)
        az = rng.uniform(-np.pi, np.pi, n_background_points)
        z = rng.uniform(-1.0, 2.0, n_background_points)
        parts.append(np.column_stack([r * np.cos(az), r * np.sin(az), z]))
    if include_ground:
        g = rng.uniform(-background_extent_m, background_extent_m, (200, 2))
        parts.append(np.column_stack([g, np.full(200, sensor_height_m - 1.2)]))

    cloud = np.vstack(parts)
    if noise_std_m > 0:
        rng_dist = np.linalg.norm(cloud, axis=1, keepdims=True)
        rays = cloud / np.maximum(rng_dist, 1e-9)
        cloud = cloud + rays * noise_std_m * rng.standard_normal((len(cloud), 1))
    return cloud


def height_filter(cloud: np.ndarray, z_lo: float, z_hi: float) -> np.ndarray:
    """Keep points with z in [z_lo, z_hi]."""
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    keep = (cloud[:, 2] >= z_lo) & (cloud[:, 2] <= z_hi)
    return cloud[keep]


def project_bev(cloud: np.ndarray) -> np.ndarray:
    """Drop height; one 2-D point per input point."""
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    return cloud[:, :2].copy()


def dbscan(points: np.ndarray, eps_m: float = 0.1, min_points: int = 5) -> tuple[list[Cluster], np.ndarray]:
    """Density clustering; returns (clusters, noise indices).

    A point is core when at least ``min_points`` points (itself included)
    lie within ``eps_m``. Clusters grow breadth-first from core points in
    index order. A border point reachable from several clusters joins the
    cluster of its nearest core point (lexicographically smallest core
    coordinates on distance ties), which keeps the partition independent of
    input order.
    """
    if eps_m <= 0 or min_points < 1:
        raise ValueError("eps must be positive and min_points >= 1")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return [], np.empty(0, dtype=int)

    tree = cKDTree(pts)
    neighbors = [np.sort(np.asarray(nb, dtype=int)) for nb in tree.query_ball_point(pts, eps_m)]
    core = np.array([len(nb) >= min_points for nb in neighbors])

    labels = np.full(n, -1)
    next_label = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != -1:
            continue
        labels[seed] = next_label
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if core[q] and labels[q] == -1:
                    labels[q] = next_label
                    queue.append(q)
        next_label += 1

    # border points: nearest core point decides
    for i in np.nonzero(~core)[0]:
        cands = [q for q in neighbors[i] if core[q]]
        if not cands:
            continue
        d = np.linalg.norm(pts[cands] - pts[i], axis=1)
        best = min(range(len(cands)), key=lambda j: (d[j], pts[cands[j], 0], pts[cands[j], 1]))
        labels[i] = labels[cands[best]]

    clusters = []
    for lab in range(next_label):
        idx = np.nonzero(labels == lab)[0]
        members = pts[idx]
        clusters.append(
            Cluster(idx, members.mean(axis=0), float(members[:, 0].std()), float(members[:, 1].std()))
        )
    return clusters, np.nonzero(labels == -1)[0]


def select_fiducial(clusters: Sequence[Cluster], score: str = "sum") -> np.ndarray:
    """Centroid of the tightest cluster.

    ``score="sum"`` ranks by std_x + std_y, ``"max"`` by max(std_x, std_y).
    Ties prefer the larger cluster, then the lower list index.
    """
    if not clusters:
        raise FiducialNotFoundError("no clusters to choose from")
    if score == "sum":
        key = lambda c: c.std_x + c.std_y  # noqa: E731
    elif score == "max":
        key = lambda c: max(c.std_x, c.std_y)  # noqa: E731
    else:
        raise ValueError(f"unknown score {score!r}")
    best = min(range(len(clusters)), key=lambda i: (key(clusters[i]), -clusters[i].size, i))
    return clusters[best].centroid.copy()


def extract_fiducial(
    cloud: np.ndarray,
    *,
    z_band: Optional[tuple[float, float]] = (-0.3, 0.3),
    eps_m: float = 0.1,
    min_points: int = 5,
    score: str = "sum",
) -> np.ndarray:
    """Height filter, BEV projection, DBSCAN and tightest-cluster selection in one call."""
    if z_band is not None:
        cloud = height_filter(cloud, *z_band)
    clusters, _ = dbscan(project_bev(cloud), eps_m, min_points)
    return select_fiducial(clusters, score)


def write_points_csv(path: str | Path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=np.float64)
    cols = ["x", "y", "z"][: points.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in points:
            w.writerow([repr(float(v)) for v in row])


def read_points_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r if row]
    return np.asarray(rows, dtype=np.float64).reshape(-1, len(header))
