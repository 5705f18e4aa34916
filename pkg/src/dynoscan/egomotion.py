"""Rigid transforms and front-end-only motion estimation.

A :class:`Pose` maps coordinates between sensor frames.  The per-frame output
of :func:`estimate_motion` takes previous-frame coordinates to current-frame
coordinates, which is the convention every downstream consumer (cost matrix,
sliding window) assumes.  There is deliberately no map and no loop closure:
drift is accepted and contained downstream by the sliding window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, UnreliableMotionError

RANSAC_THRESHOLD = 0.3      # meters; inlier residual bound
RANSAC_ITERATIONS = 100
RANSAC_MIN_INLIER_RATIO = 0.3
RANSAC_SEED = 42


@dataclass(frozen=True)
class Pose:
    """SE(3) rigid transform: ``p' = R @ p + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or many (n, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.R.T + self.t

    def inverse(self) -> "Pose":
        Rt = self.R.T
        return Pose(Rt, -Rt @ self.t)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return Pose(m[:3, :3], m[:3, 3])

    def orthonormality_error(self) -> float:
        return float(np.abs(self.R.T @ self.R - np.eye(3)).max())


def reorthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def compose(a: Pose, b: Pose) -> Pose:
    """Pose applying ``b`` first, then ``a``; rotation is re-projected onto SO(3)
    so long chains stay orthonormal."""
    return Pose(reorthonormalize(a.R @ b.R), a.R @ b.t + a.t)


def accumulate(poses: list[Pose]) -> Pose:
    """Left-to-right product of a pose chain; empty chain gives identity."""
    out = Pose.identity()
    for p in poses:
        out = compose(out, p)
    return out


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def solve_rigid(src: np.ndarray, dst: np.ndarray) -> Pose:
    """Least-squares rigid fit ``dst ~ R @ src + t`` via centroid subtraction + SVD.

    Enforces a proper rotation (det +1).  Raises on degenerate geometry where
    the rotation is not observable (fewer than 3 points, or all points
    collinear).
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape[0] < 3:
        raise DegenerateGeometryError(f"need >= 3 correspondences, got {src.shape[0]}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cov = (src - mu_s).T @ (dst - mu_d)
    u, s, vt = np.linalg.svd(cov)
    # Two vanishing singular values mean the points are collinear: rotation
    # about that line is unconstrained.
    scale = max(float(s[0]), 1e-12)
    if s[1] / scale < 1e-9:
        raise DegenerateGeometryError("correspondences are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    D = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = vt.T @ D @ u.T
    return Pose(R, mu_d - R @ mu_s)


def estimate_motion(
    src: np.ndarray,
    dst: np.ndarray,
    threshold: float = RANSAC_THRESHOLD,
    iterations: int = RANSAC_ITERATIONS,
    min_inlier_ratio: float = RANSAC_MIN_INLIER_RATIO,
    seed: int = RANSAC_SEED,
) -> Pose:
    """Robust rigid motion from 3D correspondences ``dst ~ R @ src + t``.

    RANSAC over 3-point minimal samples, then a final least-squares refit on
    the inlier consensus.  Correspondences on moving objects are expected
    outliers to the static-world model, so robustness here is a correctness
    requirement, not a tuning nicety.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    n = src.shape[0]
    if n < 4:
        raise DegenerateGeometryError(f"need >= 4 correspondences, got {n}")

    rng = np.random.default_rng(seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    for _ in range(iterations):
        pick = rng.choice(n, size=3, replace=False)
        try:
            cand = solve_rigid(src[pick], dst[pick])
        except DegenerateGeometryError:
            continue
        resid = np.linalg.norm(dst - cand.apply(src), axis=1)
        inliers = resid <= threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers

    if best_inliers is None or best_count / n < min_inlier_ratio:
        raise UnreliableMotionError(
            f"RANSAC inlier ratio {best_count / n:.2f} below {min_inlier_ratio}")
    try:
        refined = solve_rigid(src[best_inliers], dst[best_inliers])
    except DegenerateGeometryError:
        raise DegenerateGeometryError("inlier consensus is degenerate")
    # One more consensus pass with the refined model tightens the fit.
    resid = np.linalg.norm(dst - refined.apply(src), axis=1)
    inliers = resid <= threshold
    if inliers.sum() >= 3:
        try:
            refined = solve_rigid(src[inliers], dst[inliers])
        except DegenerateGeometryError:
            pass
    return refined


# --------------------------------------------------------------------------
# Quaternions and TUM trajectory IO.  One line per frame:
#   t x y z qx qy qz qw
# Poses in the file are sensor-to-world; in memory the pipeline works with
# frame-to-frame relative poses (previous -> current coordinates).
# --------------------------------------------------------------------------

def quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (x, y, z, w) from a rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


def rotation_from_quat(q: np.ndarray) -> np.ndarray:
    x, y, z, w = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def relative_to_world(relative: list[Pose]) -> list[Pose]:
    """Chain frame-to-frame poses into sensor-to-world poses (world = frame 0)."""
    world: list[Pose] = []
    cur = Pose.identity()
    for i, rel in enumerate(relative):
        if i > 0:
            cur = compose(cur, rel.inverse())
        world.append(cur)
    return world


def world_to_relative(world: list[Pose]) -> list[Pose]:
    """Invert :func:`relative_to_world`; first relative pose is identity."""
    rel: list[Pose] = []
    for i, g in enumerate(world):
        if i == 0:
            rel.append(Pose.identity())
        else:
            rel.append(compose(g.inverse(), world[i - 1]))
    return rel


def write_tum(path, timestamps: list[float], world_poses: list[Pose]) -> None:
    with open(path, "w") as fh:
        for t, pose in zip(timestamps, world_poses):
            q = quat_from_rotation(pose.R)
            x, y, z = pose.t
            fh.write(f"{t:.9f} {x:.9f} {y:.9f} {z:.9f} "
                     f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}\n")


def read_tum(path) -> tuple[list[float], list[Pose]]:
    times: list[float] = []
    poses: list[Pose] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != 8:
                raise ValueError(f"TUM line needs 8 fields, got {len(vals)}: {line!r}")
            times.append(vals[0])
            poses.append(Pose(rotation_from_quat(np.array(vals[4:8])), np.array(vals[1:4])))
    return times, poses
