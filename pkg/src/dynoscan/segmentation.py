"""Ground-plane fitting, seed back-projection, and region growing.

The dynamics stage only says which tracks move; this stage recovers the full
pixel set of each moving object by growing from the track centroid over the
intensity image, with the ground plane excluded so regions cannot leak across
the floor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .egomotion import Pose
from .frames import IntensityImage, PointFrame, SensorModel, grid_directions, pixel_of
from .labels import DynamicLabel

GROUND_ITERATIONS = 200
GROUND_TOLERANCE = 0.1       # m
GROUND_LOW_FRACTION = 0.3    # fit over the lowest 30% of points by z
GROUND_MIN_LOW_POINTS = 50
GROUND_MIN_INLIER_RATIO = 0.5
GROUND_SEED = 42
SNAP_RADIUS = 3              # px, seed snap search radius
GROW_EPS = 0.4               # m, neighbor continuity distance
GROW_MAX_POINTS = 5000       # per seed


@dataclass
class GroundPlane:
    """Plane n . p + d = 0 with the normal oriented upward (positive z)."""

    normal: np.ndarray
    d: float
    tolerance: float = GROUND_TOLERANCE
    fallback: bool = False     # set when RANSAC failed and a horizontal guess was used

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal + self.d


def _horizontal_fallback(xyz: np.ndarray, tolerance: float) -> GroundPlane:
    z5 = float(np.percentile(xyz[:, 2], 5.0))
    return GroundPlane(np.array([0.0, 0.0, 1.0]), -z5, tolerance, fallback=True)


def estimate_ground_plane(frame: PointFrame, iterations: int = GROUND_ITERATIONS,
                          tolerance: float = GROUND_TOLERANCE,
                          seed: int = GROUND_SEED) -> GroundPlane:
    """RANSAC plane over the lowest 30% of points by z.

    Falls back to a horizontal plane at the 5th-percentile z (with the
    ``fallback`` flag set) when there are too few low points or the best
    consensus covers under half of them.
    """
    xyz = frame.xyz
    k = int(round(GROUND_LOW_FRACTION * len(xyz)))
    if k < GROUND_MIN_LOW_POINTS or np.count_nonzero(xyz[:, 2] < 0.0) < GROUND_MIN_LOW_POINTS:
        return _horizontal_fallback(xyz, tolerance)
    low = xyz[np.argsort(xyz[:, 2], kind="stable")[:k]]

    rng = np.random.default_rng(seed)
    best_inliers = None
    best_count = -1
    for _ in range(iterations):
        p0, p1, p2 = low[rng.choice(len(low), size=3, replace=False)]
        n = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            continue
        n = n / norm
        inliers = np.abs(low @ n - n @ p0) <= tolerance
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_count < GROUND_MIN_INLIER_RATIO * len(low):
        return _horizontal_fallback(xyz, tolerance)

    # least-squares refit over the consensus set
    pts = low[best_inliers]
    center = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - center, full_matrices=False)
    n = vt[-1]
    if n[2] < 0:
        n = -n
    return GroundPlane(n, float(-n @ center), tolerance)


def seeds_to_current(centroids: np.ndarray, current_pose: Pose, image: IntensityImage,
                     sensor: SensorModel,
                     snap_radius: int = SNAP_RADIUS) -> tuple[list[tuple[int, int]], int]:
    """Project window-origin centroids into current-frame pixels.

    ``current_pose`` maps current sensor coordinates into the window origin;
    its inverse brings the centroids home before projection.  Seeds landing
    on empty pixels snap to the nearest occupied pixel within ``snap_radius``
    (ties broken by row then column); seeds with no occupied pixel in reach,
    or outside the grid, are dropped and counted.
    """
    centroids = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    seeds: list[tuple[int, int]] = []
    dropped = 0
    if len(centroids) == 0:
        return seeds, dropped
    back = current_pose.inverse()
    u, v, r = pixel_of(back.apply(centroids), sensor)
    occ = image.occupied
    r2_max = snap_radius * snap_radius
    for ui, vi, ri in zip(u, v, r):
        if ri <= 0 or not (0 <= vi < sensor.h):
            dropped += 1
            continue
        ui, vi = int(ui), int(vi)
        if occ[vi, ui]:
            seeds.append((ui, vi))
            continue
        best = None
        for dv in range(-snap_radius, snap_radius + 1):
            nv = vi + dv
            if not (0 <= nv < sensor.h):
                continue
            for du in range(-snap_radius, snap_radius + 1):
                d2 = du * du + dv * dv
                if d2 == 0 or d2 > r2_max:
                    continue
                nu = (ui + du) % sensor.w
                if occ[nv, nu] and (best is None or (d2, nv, nu) < best):
                    best = (d2, nv, nu)
        if best is None:
            dropped += 1
        else:
            seeds.append((best[2], best[1]))
    return seeds, dropped


N8 = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))


@dataclass
class GrowResult:
    label: DynamicLabel
    truncated: bool        # some seed hit the max_points guard
    dropped_seeds: int     # seeds that were empty or on the ground plane


def region_grow(image: IntensityImage, seeds: list[tuple[int, int]],
                sensor: SensorModel, plane: GroundPlane, eps: float = GROW_EPS,
                max_points: int = GROW_MAX_POINTS) -> GrowResult:
    """Breadth-first growth over 8-neighborhoods from each seed pixel.

    A neighbor joins when it is occupied, off the ground plane, and its 3D
    point lies within ``eps`` of the adjoining already-accepted point (local
    continuity, so depth discontinuities stop growth).  Pixel points are
    reconstructed from range along pixel-center rays, making the result a
    pure function of the image.  The azimuth seam wraps; all seeds share one
    visited set and the output is their union.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    h, w = sensor.h, sensor.w
    points = grid_directions(sensor) * image.range[:, :, None]
    eligible = image.occupied & (plane.signed_distance(
        points.reshape(-1, 3)).reshape(h, w) > plane.tolerance)

    visited = np.zeros((h, w), dtype=bool)
    accepted: list[tuple[int, int]] = []
    truncated = False
    dropped = 0
    for su, sv in seeds:
        if not (0 <= su < w and 0 <= sv < h) or not eligible[sv, su]:
            dropped += 1
            continue
        if visited[sv, su]:
            continue
        visited[sv, su] = True
        accepted.append((su, sv))
        count = 1
        queue = deque([(su, sv)])
        while queue:
            if count >= max_points:
                truncated = True
                break
            u, v = queue.popleft()
            p = points[v, u]
            for du, dv in N8:
                nv = v + dv
                if not (0 <= nv < h):
                    continue
                nu = (u + du) % w
                if visited[nv, nu] or not eligible[nv, nu]:
                    continue
                if np.linalg.norm(points[nv, nu] - p) <= eps:
                    visited[nv, nu] = True
                    accepted.append((nu, nv))
                    count += 1
                    queue.append((nu, nv))
                    if count >= max_points:
                        truncated = True
                        queue.clear()
                        break

    indices = np.array(sorted(v * w + u for u, v in accepted), dtype=np.uint32)
    return GrowResult(DynamicLabel(image.timestamp, indices), truncated, dropped)
