"""Frame-to-frame cluster association and persistent tracks.

Costs between current and previous cluster centroids are taken after
compensating the previous centroids for ego motion, so a static object under
perfect odometry costs ~0.  Dummy targets give every cluster an escape route
at a fixed penalty, which is how births and deaths stay feasible inside a
one-to-one assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import ClusterSet
from .egomotion import Pose

DUMMY_PENALTY_FACTOR = 2.0   # real <-> dummy edges cost this times d_max


@dataclass
class CostMatrix:
    """Square augmented cost matrix: (M + N) x (N + M) for M current and N
    previous clusters.  Entries above ``d_max`` carry ``blocked_cost``, a
    finite stand-in for infinity strictly dominated by any dummy route."""

    costs: np.ndarray
    n_curr: int
    n_prev: int
    d_max: float
    blocked_cost: float


def build_cost_matrix(prev: ClusterSet, curr: ClusterSet, motion: Pose,
                      d_max: float) -> CostMatrix:
    """Distances between current centroids and motion-compensated previous ones.

    ``motion`` maps previous-frame coordinates into the current frame.  Rows
    are current clusters then dummies; columns are previous clusters then
    dummies.  Real pairs farther than ``d_max`` are blocked.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    m, n = len(curr), len(prev)
    size = m + n
    blocked = 10.0 * d_max * max(size, 1)
    costs = np.zeros((size, size))
    if m and n:
        compensated = motion.apply(prev.centroids())     # (n, 3) in current frame
        d = np.linalg.norm(curr.centroids()[:, None, :] - compensated[None, :, :], axis=2)
        costs[:m, :n] = np.where(d <= d_max, d, blocked)
    # real rows x dummy columns, dummy rows x real columns
    costs[:m, n:] = DUMMY_PENALTY_FACTOR * d_max
    costs[m:, :n] = DUMMY_PENALTY_FACTOR * d_max
    return CostMatrix(costs, m, n, d_max, blocked)


def solve_assignment(matrix: CostMatrix) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment; returns surviving real pairs.

    Every row and column is assigned exactly once; pairs where either side is
    a dummy (a birth or a death) are filtered out, as are blocked pairs, which
    the optimum can never contain anyway.
    """
    rows, cols = linear_sum_assignment(matrix.costs)
    pairs = []
    for r, c in zip(rows, cols):
        if r < matrix.n_curr and c < matrix.n_prev and matrix.costs[r, c] < matrix.blocked_cost:
            pairs.append((int(r), int(c)))
    return pairs


def assignment_cost(matrix: CostMatrix) -> float:
    rows, cols = linear_sum_assignment(matrix.costs)
    return float(matrix.costs[rows, cols].sum())


@dataclass
class TrackEntry:
    frame: int
    cluster_id: int
    centroid: np.ndarray    # sensor-frame meters at that frame


@dataclass
class Track:
    id: int
    birth_frame: int
    entries: list[TrackEntry] = field(default_factory=list)
    live: bool = True
    lost_frame: int | None = None

    @property
    def last(self) -> TrackEntry:
        return self.entries[-1]


class TrackTable:
    """Owns track identity across frames; single writer (the pipeline driver).

    Matched clusters extend their track, unmatched current clusters are born
    as new tracks, and unmatched tracks die immediately; a reappearing object
    restarts as a fresh track.  Dead tracks are pruned once they fall out of
    the sliding window.
    """

    def __init__(self, prune_after: int = 10):
        self.tracks: dict[int, Track] = {}
        self.prune_after = prune_after
        self._next_id = 0
        self._cluster_to_track: dict[int, int] = {}   # previous-frame cluster id -> track id

    def live_tracks(self) -> list[Track]:
        return [t for t in self.tracks.values() if t.live]

    def update(self, pairs: list[tuple[int, int]], curr: ClusterSet,
               frame_index: int) -> list[Track]:
        """Advance the table by one frame given real-real assignment pairs
        (current cluster, previous cluster); returns tracks live this frame."""
        matched_prev = {n: m for m, n in pairs}
        extended: dict[int, int] = {}

        for prev_cluster, track_id in list(self._cluster_to_track.items()):
            track = self.tracks[track_id]
            if prev_cluster in matched_prev:
                curr_cluster = matched_prev[prev_cluster]
                track.entries.append(TrackEntry(
                    frame_index, curr_cluster, curr.clusters[curr_cluster].centroid))
                # movement analysis never looks past the sliding window, so a
                # long-lived track keeps O(window) history, not O(sequence)
                if len(track.entries) > self.prune_after + 1:
                    del track.entries[0]
                extended[curr_cluster] = track_id
            else:
                track.live = False
                track.lost_frame = frame_index

        for cluster in curr.clusters:
            if cluster.id not in extended:
                track = Track(self._next_id, frame_index,
                              [TrackEntry(frame_index, cluster.id, cluster.centroid)])
                self._next_id += 1
                self.tracks[track.id] = track
                extended[cluster.id] = track.id

        self._cluster_to_track = {c: t for c, t in extended.items()}
        self._prune(frame_index)
        return [self.tracks[t] for t in self._cluster_to_track.values()]

    def _prune(self, frame_index: int) -> None:
        stale = [tid for tid, t in self.tracks.items()
                 if not t.live and t.lost_frame is not None
                 and frame_index - t.lost_frame > self.prune_after]
        for tid in stale:
            del self.tracks[tid]
