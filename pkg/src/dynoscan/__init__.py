"""Dynamic-object detection and labeling on spinning-LiDAR scans.

The toolkit turns raw revolutions into spherical intensity images, finds
high-contrast foreground, tracks clusters across frames with front-end-only
odometry, classifies tracks by sliding-window displacement, and grows the
dynamic ones back into full per-pixel labels.
"""

from .clustering import Cluster, ClusterSet, cluster_points
from .config import PipelineConfig, load_config
from .dynamics import SlidingWindow, TrackVerdict
from .egomotion import Pose, compose, estimate_motion, solve_rigid
from .errors import (ConfigError, DynoscanError, EmptyInputError, FormatError,
                     InsufficientFeaturesError, InsufficientMatchesError,
                     DegenerateGeometryError, UnreliableMotionError)
from .evaluation import evaluate_labels, metrics, score_frame, wilcoxon_signed_rank
from .foreground import GaussianKernel, build_kernel, extract_foreground
from .frames import (IntensityImage, Point3, PointFrame, SensorModel, FrameFile,
                     project, read_frames, unproject, write_frames)
from .labels import (DynamicLabel, read_labels_binary, read_labels_jsonl,
                     write_labels_binary, write_labels_jsonl)
from .pipeline import FrameResult, Pipeline, run
from .segmentation import GroundPlane, estimate_ground_plane, region_grow
from .simulator import DriftParams, Scene, inject_drift, load_scene, simulate

__version__ = "0.1.0"

__all__ = [
    "Cluster", "ClusterSet", "cluster_points",
    "PipelineConfig", "load_config",
    "SlidingWindow", "TrackVerdict",
    "Pose", "compose", "estimate_motion", "solve_rigid",
    "DynoscanError", "EmptyInputError", "FormatError", "ConfigError",
    "InsufficientFeaturesError", "InsufficientMatchesError",
    "DegenerateGeometryError", "UnreliableMotionError",
    "evaluate_labels", "metrics", "score_frame", "wilcoxon_signed_rank",
    "GaussianKernel", "build_kernel", "extract_foreground",
    "IntensityImage", "Point3", "PointFrame", "SensorModel", "FrameFile",
    "project", "read_frames", "unproject", "write_frames",
    "DynamicLabel", "read_labels_binary", "read_labels_jsonl",
    "write_labels_binary", "write_labels_jsonl",
    "FrameResult", "Pipeline", "run",
    "GroundPlane", "estimate_ground_plane", "region_grow",
    "DriftParams", "Scene", "inject_drift", "load_scene", "simulate",
    "__version__",
]
