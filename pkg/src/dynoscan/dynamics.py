"""Sliding-window movement analysis and dynamic/static verdicts.

All displacement math happens in the coordinate frame of the first frame
currently inside the window.  Those per-frame origin poses are recomputed
from the window's own relative poses every time the window slides, so
odometry error older than the window can never leak into a verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterSet
from .egomotion import Pose, compose

DEFAULT_WINDOW = 10          # frames
DEFAULT_EPS_D = 0.5          # m, net displacement threshold
DEFAULT_EPS_O = 0.7          # unitless, net/path ratio threshold
DEFAULT_EPS_THETA = math.radians(15.0)   # rad, motion vs main-axis angle

STATIC = "static"
DYNAMIC = "dynamic"
OUTLIER = "outlier"


@dataclass
class TrackVerdict:
    track_id: int
    frame: int
    label: str            # static | dynamic | outlier
    f: float              # net displacement, m
    f_a: float            # accumulated path length, m
    ratio: float          # f / f_a, 0 when f_a == 0
    theta: float          # rad in [0, pi/2]

    def record(self) -> dict:
        return {"frame": self.frame, "track_id": self.track_id, "class": self.label,
                "f": self.f, "f_a": self.f_a, "ratio": self.ratio,
                "theta_deg": math.degrees(self.theta)}


def window_poses(relatives: list[Pose]) -> list[Pose]:
    """Cumulative sequential composition of a pose chain.

    ``result[i]`` applied to a point equals applying ``relatives[0]`` through
    ``relatives[i]`` in order.
    """
    out = []
    acc = Pose.identity()
    for pose in relatives:
        acc = compose(pose, acc)
        out.append(acc)
    return out


def to_window_origin(centroid: np.ndarray, pose: Pose) -> np.ndarray:
    """Express a sensor-frame centroid in window-origin coordinates."""
    return pose.apply(np.asarray(centroid, dtype=np.float64))


def net_displacement(history: np.ndarray) -> float:
    """f: straight-line distance from the first to the last window centroid."""
    if len(history) < 2:
        raise ValueError("need at least 2 window entries")
    return float(np.linalg.norm(history[-1] - history[0]))


def path_length(history: np.ndarray) -> float:
    """f_a: sum of consecutive centroid displacements inside the window."""
    if len(history) < 2:
        raise ValueError("need at least 2 window entries")
    return float(np.linalg.norm(np.diff(history, axis=0), axis=1).sum())


def ratio_test(f: float, f_a: float, eps_o: float) -> bool:
    """Purposeful motion accumulates distance in one direction, so the
    net/path ratio stays near 1; zero-mean drift jitter does not.  A zero
    path length means perfectly stationary and fails the test."""
    if f_a <= 0.0:
        return False
    return f / f_a >= eps_o


def pca_main_direction(points: np.ndarray) -> np.ndarray | None:
    """Unit first principal axis of a point set, or None when degenerate."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        return None
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] < 1e-12:
        return None
    return vt[0]


def pca_long_object_test(points: np.ndarray, direction: np.ndarray,
                         eps_theta: float) -> tuple[bool, float]:
    """Flag apparent motion along a cluster's own main axis.

    A surface that is long and parallel to the travel direction (a wall seen
    by a moving sensor) slides along itself, producing centroid displacement
    without real motion.  Returns (is_outlier, theta); theta folds the
    principal-axis sign via the absolute dot product, so it lives in
    [0, pi/2].  Degenerate point sets skip the test and are not outliers.
    """
    axis = pca_main_direction(points)
    if axis is None:
        return False, math.pi / 2
    v = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return False, math.pi / 2
    cos_theta = abs(float(np.dot(v / norm, axis / np.linalg.norm(axis))))
    theta = math.acos(min(1.0, max(0.0, cos_theta)))
    return theta < eps_theta, theta


class SlidingWindow:
    """Ring of the last k frames with per-frame window-origin poses.

    Classification state is the window content only; tracks born inside the
    window are judged from their first in-window entry, which at birth is the
    birth frame itself.
    """

    def __init__(self, k: int = DEFAULT_WINDOW):
        if k < 2:
            raise ValueError("window must span at least 2 frames")
        self.k = k
        self.frames: list[tuple[int, float, Pose]] = []   # (index, timestamp, relative pose)

    def push(self, frame_index: int, timestamp: float, relative: Pose) -> None:
        """Append a frame with its incoming relative pose (previous frame
        coordinates to this frame's coordinates); identity for the first."""
        self.frames.append((frame_index, timestamp, relative))
        if len(self.frames) > self.k:
            self.frames.pop(0)

    def origin_poses(self) -> dict[int, Pose]:
        """Pose per in-window frame index mapping that frame's sensor
        coordinates into the window-origin frame.  The oldest frame's own
        incoming pose is ignored: it leads out of the window, and discarding
        it is exactly what confines drift to the window span."""
        out: dict[int, Pose] = {}
        acc = Pose.identity()
        for i, (index, _, relative) in enumerate(self.frames):
            if i > 0:
                acc = compose(acc, relative.inverse())
            out[index] = acc
        return out

    def evaluate(self, tracks, clusters: ClusterSet, points: np.ndarray,
                 frame_index: int, eps_d: float = DEFAULT_EPS_D,
                 eps_o: float = DEFAULT_EPS_O,
                 eps_theta: float = DEFAULT_EPS_THETA) -> list[TrackVerdict]:
        """Classify each track live at ``frame_index``.

        ``points`` holds the current frame's foreground coordinates indexed
        by the members of ``clusters``.  Tracks with fewer than two in-window
        entries stay unclassified and yield no verdict.
        """
        poses = self.origin_poses()
        verdicts = []
        for track in tracks:
            if not track.entries or track.last.frame != frame_index:
                continue
            history = [(e.frame, e.centroid, e.cluster_id)
                       for e in track.entries if e.frame in poses]
            if len(history) < 2:
                continue
            window_pts = np.array([to_window_origin(c, poses[f]) for f, c, _ in history])
            f = net_displacement(window_pts)
            f_a = path_length(window_pts)
            ratio = f / f_a if f_a > 0 else 0.0

            theta = math.pi / 2
            outlier = False
            if f > 0:
                members = clusters.clusters[history[-1][2]].members
                outlier, theta = pca_long_object_test(
                    points[members], window_pts[-1] - window_pts[0], eps_theta)

            if f > eps_d and ratio >= eps_o:
                label = OUTLIER if outlier else DYNAMIC
            else:
                label = STATIC
            verdicts.append(TrackVerdict(track.id, frame_index, label,
                                         f, f_a, ratio, theta))
        return verdicts
