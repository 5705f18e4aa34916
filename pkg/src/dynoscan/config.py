"""Pipeline configuration: defaults, INI loading, and validation.

Every tunable lives here with its default; an INI file overrides defaults and
command-line flags override the file.  Unknown sections or keys are rejected
rather than ignored so typos fail loudly at startup.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields

from .dynamics import DEFAULT_EPS_D, DEFAULT_EPS_O, DEFAULT_EPS_THETA, DEFAULT_WINDOW
from .egomotion import (RANSAC_ITERATIONS, RANSAC_MIN_INLIER_RATIO, RANSAC_SEED,
                        RANSAC_THRESHOLD)
from .errors import ConfigError
from .features import DEFAULT_MAX_FEATURES, FAST_THRESHOLD, LOWE_RATIO
from .foreground import build_kernel
from .frames import SensorModel
from .segmentation import (GROUND_ITERATIONS, GROUND_SEED, GROUND_TOLERANCE,
                           GROW_EPS, GROW_MAX_POINTS, SNAP_RADIUS)


@dataclass
class PipelineConfig:
    # sensor
    width: int = 1024
    height: int = 64
    beta_up: float = math.pi / 4
    beta_fov: float = math.pi / 2
    rate_hz: float = 10.0
    # foreground
    kernel_a: int = 4
    kernel_b: int = 1
    sigma_m: float = 2.0
    sigma_n: float = 0.8
    theta: float = 8.0
    # odometry
    max_features: int = DEFAULT_MAX_FEATURES
    fast_threshold: int = FAST_THRESHOLD
    lowe_ratio: float = LOWE_RATIO
    ransac_threshold: float = RANSAC_THRESHOLD
    ransac_iterations: int = RANSAC_ITERATIONS
    ransac_min_inlier_ratio: float = RANSAC_MIN_INLIER_RATIO
    ransac_seed: int = RANSAC_SEED
    # clustering
    eps_xy: float = 0.5
    eps_z: float = 0.5
    min_points: int = 3
    range_scaled: bool = False
    range_scale_distance: float = 30.0
    # association
    d_max: float = 1.0
    # dynamics
    window: int = DEFAULT_WINDOW
    eps_d: float = DEFAULT_EPS_D
    eps_o: float = DEFAULT_EPS_O
    eps_theta_deg: float = math.degrees(DEFAULT_EPS_THETA)
    # segmentation
    grow_eps: float = GROW_EPS
    grow_max_points: int = GROW_MAX_POINTS
    snap_radius: int = SNAP_RADIUS
    plane_tolerance: float = GROUND_TOLERANCE
    ground_iterations: int = GROUND_ITERATIONS
    ground_seed: int = GROUND_SEED

    @property
    def eps_theta(self) -> float:
        return math.radians(self.eps_theta_deg)

    def sensor(self) -> SensorModel:
        return SensorModel(self.width, self.height, self.beta_up, self.beta_fov,
                           self.rate_hz)

    def validate(self) -> "PipelineConfig":
        """Check every field against its consuming module's preconditions."""
        try:
            self.sensor()
            build_kernel(self.kernel_a, self.kernel_b, self.sigma_m, self.sigma_n)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(str(exc)) from exc
        positive = ["eps_xy", "eps_z", "d_max", "grow_eps", "plane_tolerance",
                    "range_scale_distance", "lowe_ratio", "ransac_threshold",
                    "ransac_min_inlier_ratio"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        at_least = {"theta": 0.0, "eps_d": 0.0, "eps_o": 0.0, "eps_theta_deg": 0.0,
                    "min_points": 1, "window": 2, "max_features": 8,
                    "fast_threshold": 1, "ransac_iterations": 1,
                    "ground_iterations": 1, "grow_max_points": 1, "snap_radius": 0}
        for name, bound in at_least.items():
            if getattr(self, name) < bound:
                raise ConfigError(f"{name} must be >= {bound}")
        return self


_SECTIONS = {
    "sensor": ["width", "height", "beta_up", "beta_fov", "rate_hz"],
    "foreground": ["kernel_a", "kernel_b", "sigma_m", "sigma_n", "theta"],
    "odometry": ["max_features", "fast_threshold", "lowe_ratio", "ransac_threshold",
                 "ransac_iterations", "ransac_min_inlier_ratio", "ransac_seed"],
    "clustering": ["eps_xy", "eps_z", "min_points", "range_scaled",
                   "range_scale_distance"],
    "association": ["d_max"],
    "dynamics": ["window", "eps_d", "eps_o", "eps_theta_deg"],
    "segmentation": ["grow_eps", "grow_max_points", "snap_radius", "plane_tolerance",
                     "ground_iterations", "ground_seed"],
}

_FIELD_TYPE = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPE[key]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def load_config(path) -> PipelineConfig:
    """Read an INI file into a validated PipelineConfig."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    cfg = PipelineConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            setattr(cfg, key, _parse_value(key, raw))
    return cfg.validate()


def apply_overrides(cfg: PipelineConfig, overrides: list[str]) -> PipelineConfig:
    """Apply ``section.key=value`` strings (CLI flags) on top of a config."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(f"unknown config entry {dotted!r}")
        setattr(cfg, key, _parse_value(key, raw))
    return cfg.validate()


def default_ini() -> str:
    """The full default configuration as INI text (a self-documenting template)."""
    cfg = PipelineConfig()
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {getattr(cfg, key)}")
        lines.append("")
    return "\n".join(lines)
