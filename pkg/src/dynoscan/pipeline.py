"""Per-frame orchestration: project, foreground, odometry, cluster, associate,
classify, grow, label.

The pipeline is a single streaming pass.  State is one previous frame plus the
sliding window and track table, so memory stays O(window) regardless of
sequence length.  Any stage failure degrades gracefully: the frame is flagged,
the last relative pose is reused, and the stream continues.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import association, dynamics, features, segmentation
from .config import PipelineConfig
from .egomotion import Pose, compose, estimate_motion
from .errors import DynoscanError
from .foreground import build_kernel, extract_foreground
from .frames import IntensityImage, PointFrame, project
from .labels import DynamicLabel


@dataclass
class FrameResult:
    index: int
    timestamp: float
    relative: Pose                 # previous-frame -> this-frame coordinates
    world: Pose                    # sensor-to-world (identity at frame 0)
    cluster_count: int
    verdicts: list[dynamics.TrackVerdict]
    label: DynamicLabel
    timings: dict[str, float] = field(default_factory=dict)   # stage -> ms
    flags: list[str] = field(default_factory=list)
    dropped_seeds: int = 0
    truncated: bool = False

    @property
    def ego_failed(self) -> bool:
        return "ego_failure" in self.flags


class Pipeline:
    """Streaming driver; feed frames in timestamp order via :meth:`process`."""

    def __init__(self, config: PipelineConfig, odometry_in: list[Pose] | None = None):
        config.validate()
        self.config = config
        self.sensor = config.sensor()
        self.kernel = build_kernel(config.kernel_a, config.kernel_b,
                                   config.sigma_m, config.sigma_n)
        self.odometry_in = odometry_in
        self.window = dynamics.SlidingWindow(config.window)
        self.tracks = association.TrackTable(prune_after=config.window)
        self.index = 0
        self.world = Pose.identity()
        self._last_relative = Pose.identity()
        self._prev_image: IntensityImage | None = None
        self._prev_features: list[features.Feature] | None = None
        self._prev_xyz: np.ndarray | None = None
        self._prev_clusters = None

    def _relative_pose(self, image: IntensityImage, xyz: np.ndarray,
                       flags: list[str]) -> Pose:
        """Relative pose for the current frame, from whichever source is wired."""
        cfg = self.config
        if self.odometry_in is not None:
            if self.index < len(self.odometry_in):
                return self.odometry_in[self.index]
            flags.append("ego_failure")
            return self._last_relative

        prev_feats = self._prev_features
        try:
            self._prev_features = features.detect_features(image, cfg.max_features,
                                                           cfg.fast_threshold)
        except DynoscanError:
            self._prev_features = None
        if self._prev_image is None:
            return Pose.identity()
        if self._prev_features is None or prev_feats is None:
            flags.append("ego_failure")
            return self._last_relative
        try:
            matches = features.build_match_set(
                prev_feats, self._prev_features, self._prev_image, image,
                self._prev_xyz, xyz, cfg.lowe_ratio)
            return estimate_motion(matches.x_prev, matches.y_curr,
                                   cfg.ransac_threshold, cfg.ransac_iterations,
                                   cfg.ransac_min_inlier_ratio, cfg.ransac_seed)
        except DynoscanError:
            flags.append("ego_failure")
            return self._last_relative

    def process(self, frame: PointFrame) -> FrameResult:
        cfg = self.config
        timings: dict[str, float] = {}
        flags: list[str] = []
        start = time.perf_counter()

        def lap(stage: str, since: float) -> float:
            now = time.perf_counter()
            timings[stage] = (now - since) * 1000.0
            return now

        try:
            image = project(frame, self.sensor)
        except DynoscanError:
            # zero-point frame: keep the pose chain alive, emit an empty result
            result = FrameResult(self.index, frame.timestamp, self._last_relative,
                                 self.world, 0, [],
                                 DynamicLabel(frame.timestamp), {}, ["empty_frame"])
            self.window.push(self.index, frame.timestamp, self._last_relative)
            self.index += 1
            return result
        mark = lap("project", start)

        fg = extract_foreground(image, frame.xyz, self.kernel, cfg.theta)
        mark = lap("foreground", mark)

        relative = self._relative_pose(image, frame.xyz, flags)
        self._last_relative = relative
        if self.index > 0:
            self.world = compose(self.world, relative.inverse())
        mark = lap("odometry", mark)

        clusters = _cluster_stage(fg, frame.timestamp, cfg)
        mark = lap("clustering", mark)

        if self._prev_clusters is not None:
            cost = association.build_cost_matrix(self._prev_clusters, clusters,
                                                 relative, cfg.d_max)
            pairs = association.solve_assignment(cost)
        else:
            pairs = []
        live = self.tracks.update(pairs, clusters, self.index)
        mark = lap("association", mark)

        self.window.push(self.index, frame.timestamp, relative)
        verdicts = self.window.evaluate(live, clusters, fg.xyz, self.index,
                                        cfg.eps_d, cfg.eps_o, cfg.eps_theta)
        mark = lap("dynamics", mark)

        label, dropped, truncated = _segment_stage(
            frame, image, verdicts, live, self.window, self.index, self.sensor, cfg)
        mark = lap("segmentation", mark)

        timings["total"] = (mark - start) * 1000.0
        result = FrameResult(self.index, frame.timestamp, relative, self.world,
                             len(clusters.clusters), verdicts, label, timings,
                             flags, dropped, truncated)
        self._prev_image = image
        self._prev_xyz = frame.xyz
        self._prev_clusters = clusters
        self.index += 1
        return result


def _cluster_stage(fg, timestamp: float, cfg: PipelineConfig):
    from .clustering import cluster_points
    return cluster_points(fg.xyz, cfg.eps_xy, cfg.eps_z, cfg.min_points,
                          timestamp=timestamp, range_scaled=cfg.range_scaled,
                          range_scale_distance=cfg.range_scale_distance)


def _segment_stage(frame, image, verdicts, live_tracks, window, index, sensor, cfg):
    dynamic_ids = {v.track_id for v in verdicts if v.label == dynamics.DYNAMIC}
    if not dynamic_ids:
        return DynamicLabel(frame.timestamp), 0, False
    poses = window.origin_poses()
    current = poses[index]
    centroids = [dynamics.to_window_origin(t.last.centroid, current)
                 for t in live_tracks if t.id in dynamic_ids]
    plane = segmentation.estimate_ground_plane(
        frame, cfg.ground_iterations, cfg.plane_tolerance, cfg.ground_seed)
    seeds, dropped = segmentation.seeds_to_current(
        np.array(centroids), current, image, sensor, cfg.snap_radius)
    grown = segmentation.region_grow(image, seeds, sensor, plane,
                                     cfg.grow_eps, cfg.grow_max_points)
    return grown.label, dropped + grown.dropped_seeds, grown.truncated


def run(frames, config: PipelineConfig,
        odometry_in: list[Pose] | None = None):
    """Process an iterable of frames, yielding one FrameResult each."""
    pipe = Pipeline(config, odometry_in)
    for frame in frames:
        yield pipe.process(frame)
