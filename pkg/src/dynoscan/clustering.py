"""Anisotropic Euclidean clustering of foreground points.

Two points join the same cluster when their horizontal (xy) distance and
vertical (|dz|) distance are both within their thresholds; clusters are the
transitive closure of that relation.  Thresholds are separate because the
vertical gap between laser beams grows with range much faster than the
horizontal one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Cluster:
    id: int
    members: np.ndarray     # indices into the clustered point set
    centroid: np.ndarray    # (3,) mean of member coordinates


@dataclass
class ClusterSet:
    clusters: list[Cluster]
    timestamp: float = 0.0

    def __len__(self) -> int:
        return len(self.clusters)

    def centroids(self) -> np.ndarray:
        if not self.clusters:
            return np.zeros((0, 3))
        return np.stack([c.centroid for c in self.clusters])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def centroid(xyz: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Componentwise mean of the member coordinates."""
    members = np.asarray(members)
    if members.size == 0:
        raise ValueError("cannot take the centroid of an empty cluster")
    return np.asarray(xyz, dtype=np.float64)[members].mean(axis=0)


def cluster_points(
    xyz: np.ndarray,
    eps_xy: float,
    eps_z: float,
    min_points: int = 3,
    timestamp: float = 0.0,
    range_scaled: bool = False,
    range_scale_distance: float = 30.0,
) -> ClusterSet:
    """Partition points into clusters; groups below ``min_points`` are noise.

    Near-linear in practice: points are hashed into an xy grid of cell size
    ``eps_xy`` so only the 3x3 cell neighborhood needs pairwise checks, and a
    union-find merges qualifying pairs.  ``range_scaled`` optionally widens
    both thresholds by ``1 + r / range_scale_distance`` to follow beam
    divergence; off by default.

    The partition is invariant to input order up to relabeling, and cluster
    ids are dense ``0..q-1`` in order of each cluster's first member.
    """
    if eps_xy <= 0 or eps_z <= 0:
        raise ValueError("eps_xy and eps_z must be positive")
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    n = xyz.shape[0]
    if n == 0:
        return ClusterSet([], timestamp)

    if range_scaled:
        r = np.linalg.norm(xyz, axis=1)
        scale = 1.0 + r / range_scale_distance
        exy = eps_xy * scale
        ez = eps_z * scale
    else:
        exy = np.full(n, eps_xy)
        ez = np.full(n, eps_z)

    cell_size = float(exy.max())
    cells: dict[tuple[int, int], list[int]] = {}
    cx = np.floor(xyz[:, 0] / cell_size).astype(np.int64)
    cy = np.floor(xyz[:, 1] / cell_size).astype(np.int64)
    for i in range(n):
        cells.setdefault((int(cx[i]), int(cy[i])), []).append(i)

    uf = _UnionFind(n)
    # Forward half of the 3x3 neighborhood; the symmetric half is covered by
    # the neighbor cell's own pass.
    offsets = ((0, 0), (1, 0), (0, 1), (1, 1), (1, -1))
    for (gx, gy), members in cells.items():
        pi = np.asarray(members)
        for dx, dy in offsets:
            other = cells.get((gx + dx, gy + dy))
            if other is None:
                continue
            pj = np.asarray(other)
            d_xy = np.linalg.norm(xyz[pi, None, :2] - xyz[None, pj, :2], axis=2)
            d_z = np.abs(xyz[pi, None, 2] - xyz[None, pj, 2])
            # A pair joins when both components pass for either point's threshold
            # (symmetric by construction when thresholds are uniform).
            lim_xy = np.minimum(exy[pi][:, None], exy[None, pj])
            lim_z = np.minimum(ez[pi][:, None], ez[None, pj])
            ii, jj = np.nonzero((d_xy <= lim_xy) & (d_z <= lim_z))
            for a, b in zip(pi[ii], pj[jj]):
                if a != b:
                    uf.union(int(a), int(b))

    roots = np.array([uf.find(i) for i in range(n)])
    clusters: list[Cluster] = []
    seen: dict[int, list[int]] = {}
    for i in range(n):
        seen.setdefault(int(roots[i]), []).append(i)
    for root in sorted(seen, key=lambda r: seen[r][0]):
        members = np.asarray(seen[root])
        if members.size < min_points:
            continue
        clusters.append(Cluster(len(clusters), members, xyz[members].mean(axis=0)))
    return ClusterSet(clusters, timestamp)
