"""Ray-casting LiDAR simulator for closed-loop evaluation.

Casts one ray through every pixel center per revolution, so projecting the
generated points reproduces pixel bookkeeping exactly: ground-truth labels
can be stated in pixel indices with no quantization slack.  Geometry is
limited to axis-aligned boxes and planes, which keeps intersections exact
enough to check against closed-form oracles.  Points and intensities are
quantized through float32 so a simulation consumed from memory and one
round-tripped through the frame file are bit-identical.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .egomotion import Pose, compose, rotation_z
from .errors import ConfigError
from .frames import PointFrame, SensorModel, grid_directions
from .labels import DynamicLabel

DYNAMIC_SPEED = 0.05         # m/s; slower actors are not ground-truth dynamic
MIN_RANGE = 0.05             # m, floor for noisy ranges
RAY_BUDGET = 2 ** 31         # total rays per simulation


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    material: float
    amplitude: float = 0.0    # texture contrast around the base material
    scale: float = 1.0        # texture cell edge, m
    salt: int = 0

    def __post_init__(self):
        if np.any(self.hi <= self.lo):
            raise ConfigError("box extents must be positive")


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray        # unit
    offset: float             # plane is n . p = offset
    material: float
    amplitude: float = 0.0
    scale: float = 1.0
    salt: int = 0


@dataclass
class Actor:
    size: np.ndarray                         # (sx, sy, sz); box, base centered at waypoint
    material: float
    waypoints: list[tuple[float, np.ndarray]]   # (t, position), piecewise linear
    amplitude: float = 0.0
    scale: float = 1.0
    salt: int = 0


@dataclass
class Scene:
    sensor: SensorModel
    statics: list
    actors: list[Actor]
    ego: list[tuple[float, np.ndarray, float]]   # (t, position, yaw)
    duration: float
    range_sigma: float = 0.0
    intensity_sigma: float = 0.0
    seed: int = 0
    name: str = "scene"


@dataclass
class DriftParams:
    sigma_t: float = 0.0      # m per frame, translation random walk
    sigma_r: float = 0.0      # rad per frame, rotation random walk
    seed: int = 0

    def __post_init__(self):
        if self.sigma_t < 0 or self.sigma_r < 0:
            raise ConfigError("drift sigmas must be non-negative")


@dataclass
class SimulationResult:
    frames: list[PointFrame]
    labels: list[DynamicLabel]
    relative: list[Pose]      # frame-to-frame, first entry identity
    world: list[Pose]         # sensor-to-world per frame
    sensor: SensorModel


def _hash01(cx: np.ndarray, cy: np.ndarray, cz: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic per-cell value in [0, 1); vectorized integer mixing."""
    h = (cx.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ cy.astype(np.uint64) * np.uint64(0xBF58476D1CE4E5B9)
         ^ cz.astype(np.uint64) * np.uint64(0x94D049BB133111EB)
         ^ np.uint64((salt * 0xD6E8FEB86659FD93) & 0xFFFFFFFFFFFFFFFF))
    h ^= h >> np.uint64(31)
    h *= np.uint64(0x7FB5D329728EA185)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x81DADEF4BC2DD44D)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _surface_value(prim, points: np.ndarray) -> np.ndarray:
    """Base material plus the cell-hashed texture term at the hit points."""
    base = np.full(len(points), prim.material)
    if prim.amplitude > 0.0:
        cells = np.floor(points / prim.scale).astype(np.int64)
        tex = _hash01(cells[:, 0], cells[:, 1], cells[:, 2], prim.salt)
        base = base + prim.amplitude * (2.0 * tex - 1.0)
    return base


def intersect_box(origin: np.ndarray, dirs: np.ndarray, box: Box) -> np.ndarray:
    """Slab-method hit distances, inf where the ray misses."""
    inv = 1.0 / np.where(dirs == 0.0, 1e-300, dirs)
    t0 = (box.lo[None, :] - origin[None, :]) * inv
    t1 = (box.hi[None, :] - origin[None, :]) * inv
    tmin = np.minimum(t0, t1).max(axis=1)
    tmax = np.maximum(t0, t1).min(axis=1)
    hit = (tmax >= tmin) & (tmin > 1e-9)
    return np.where(hit, tmin, np.inf)


def intersect_plane(origin: np.ndarray, dirs: np.ndarray, plane: Plane) -> np.ndarray:
    denom = dirs @ plane.normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (plane.offset - origin @ plane.normal) / denom
    hit = (np.abs(denom) > 1e-12) & (t > 1e-9)
    return np.where(hit, t, np.inf)


def interpolate_track(waypoints: list[tuple[float, np.ndarray]],
                      t: float) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear position and segment velocity at time t (clamped)."""
    times = [w[0] for w in waypoints]
    if t <= times[0]:
        seg = 0
    elif t >= times[-1]:
        seg = len(waypoints) - 2
    else:
        seg = bisect.bisect_right(times, t) - 1
    t0, p0 = waypoints[seg]
    t1, p1 = waypoints[seg + 1]
    span = t1 - t0
    alpha = min(1.0, max(0.0, (t - t0) / span))
    vel = (p1 - p0) / span
    return p0 + alpha * (p1 - p0), vel


def ego_pose_at(ego: list[tuple[float, np.ndarray, float]], t: float) -> Pose:
    """Sensor-to-world pose from timed (position, yaw) waypoints."""
    pos, _ = interpolate_track([(wt, p) for wt, p, _ in ego], t)
    yaw_track = [(wt, np.array([y, 0.0, 0.0])) for wt, _, y in ego]
    yaw, _ = interpolate_track(yaw_track, t)
    return Pose(rotation_z(float(yaw[0])), pos)


def _actor_box(actor: Actor, t: float) -> tuple[Box, float]:
    pos, vel = interpolate_track(actor.waypoints, t)
    half = actor.size / 2.0
    lo = np.array([pos[0] - half[0], pos[1] - half[1], pos[2]])
    hi = np.array([pos[0] + half[0], pos[1] + half[1], pos[2] + actor.size[2]])
    return (Box(lo, hi, actor.material, actor.amplitude, actor.scale, actor.salt),
            float(np.linalg.norm(vel)))


def simulate(scene: Scene) -> SimulationResult:
    """Generate frames, ground-truth labels, and exact poses for a scene."""
    sensor = scene.sensor
    n_frames = int(round(scene.duration * sensor.rate_hz))
    if not scene.statics and not scene.actors:
        raise ConfigError("scene has no geometry")
    if n_frames * sensor.w * sensor.h > RAY_BUDGET:
        raise ConfigError("scene exceeds the ray budget")
    _check_coverage(scene, n_frames)

    rng = np.random.default_rng(scene.seed)
    dirs_sensor = grid_directions(sensor).reshape(-1, 3)
    frames: list[PointFrame] = []
    labels: list[DynamicLabel] = []
    world: list[Pose] = []

    for i in range(n_frames):
        t = i / sensor.rate_hz
        ego = ego_pose_at(scene.ego, t)
        world.append(ego)
        dirs = dirs_sensor @ ego.R.T
        origin = ego.t

        prims = list(scene.statics)
        dynamic_ids = set()
        for actor in scene.actors:
            box, speed = _actor_box(actor, t)
            if speed > DYNAMIC_SPEED:
                dynamic_ids.add(len(prims))
            prims.append(box)

        best_t = np.full(len(dirs), np.inf)
        best_p = np.full(len(dirs), -1, dtype=np.int64)
        for pi, prim in enumerate(prims):
            if isinstance(prim, Box):
                tt = intersect_box(origin, dirs, prim)
            else:
                tt = intersect_plane(origin, dirs, prim)
            closer = tt < best_t
            best_t[closer] = tt[closer]
            best_p[closer] = pi

        hit = np.isfinite(best_t)
        ranges = best_t[hit]
        hit_dirs = dirs[hit]
        hit_points = origin[None, :] + hit_dirs * ranges[:, None]
        owners = best_p[hit]

        value = np.empty(len(ranges))
        for pi, prim in enumerate(prims):
            mask = owners == pi
            if np.any(mask):
                value[mask] = _surface_value(prim, hit_points[mask])
        intensity = value / np.maximum(ranges, 1.0) ** 2
        if scene.intensity_sigma > 0:
            intensity = intensity + rng.normal(0.0, scene.intensity_sigma, len(ranges))
        intensity = np.maximum(intensity, 0.0)
        if scene.range_sigma > 0:
            ranges = ranges + rng.normal(0.0, scene.range_sigma, len(ranges))
        ranges = np.maximum(ranges, MIN_RANGE)

        xyz = dirs_sensor[hit] * ranges[:, None]
        # quantize exactly like the frame file so both paths agree bit for bit
        xyz = xyz.astype(np.float32).astype(np.float64)
        intensity = intensity.astype(np.float32).astype(np.float64)
        frames.append(PointFrame(t, xyz, intensity))

        dyn_mask = np.isin(best_p, sorted(dynamic_ids)) & hit
        labels.append(DynamicLabel(t, np.flatnonzero(dyn_mask).astype(np.uint32)))

    relative = [Pose.identity()]
    for i in range(1, n_frames):
        relative.append(compose(world[i].inverse(), world[i - 1]))
    return SimulationResult(frames, labels, relative, world, sensor)


def _check_coverage(scene: Scene, n_frames: int) -> None:
    last_t = (n_frames - 1) / scene.sensor.rate_hz
    for name, track in [("ego", [(w[0],) for w in scene.ego])] + [
            (f"actor {i}", [(w[0],) for w in a.waypoints])
            for i, a in enumerate(scene.actors)]:
        if track[0][0] > 0.0 or track[-1][0] < last_t:
            raise ConfigError(f"{name} trajectory does not cover [0, {last_t:.1f}] s")


def inject_drift(relative: list[Pose], params: DriftParams) -> list[Pose]:
    """Compose a seeded random-walk perturbation onto each relative pose.

    The first pose (the identity anchor) is left alone.  Zero sigmas return
    the input poses unchanged, bit for bit.
    """
    if params.sigma_t == 0.0 and params.sigma_r == 0.0:
        return list(relative)
    rng = np.random.default_rng(params.seed)
    out = [relative[0]]
    for pose in relative[1:]:
        dt = rng.normal(0.0, params.sigma_t, 3) if params.sigma_t > 0 else np.zeros(3)
        da = rng.normal(0.0, params.sigma_r, 3) if params.sigma_r > 0 else np.zeros(3)
        ca, sa = math.cos(da[0]), math.sin(da[0])
        cb, sb = math.cos(da[1]), math.sin(da[1])
        cc, sc = math.cos(da[2]), math.sin(da[2])
        rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
        ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
        rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
        noise = Pose(rz @ ry @ rx, dt)
        out.append(compose(noise, pose))
    return out


# --------------------------------------------------------------------------
# Scene JSON: {"name", "duration", "seed", "sensor": {...}, "noise": {...},
#              "statics": [...], "actors": [...], "ego": [...]}
# --------------------------------------------------------------------------

_SCENE_KEYS = {"name", "duration", "seed", "sensor", "noise", "statics", "actors", "ego"}


def scene_from_dict(doc: dict) -> Scene:
    unknown = set(doc) - _SCENE_KEYS
    if unknown:
        raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
    try:
        s = doc.get("sensor", {})
        sensor = SensorModel(
            w=int(s.get("w", 1024)), h=int(s.get("h", 64)),
            beta_up=float(s.get("beta_up", math.pi / 4)),
            beta_fov=float(s.get("beta_fov", math.pi / 2)),
            rate_hz=float(s.get("rate_hz", 10.0)))
        noise = doc.get("noise", {})
        statics = []
        for i, p in enumerate(doc.get("statics", [])):
            kind = p.get("type")
            common = dict(material=float(p["material"]),
                          amplitude=float(p.get("amplitude", 0.0)),
                          scale=float(p.get("scale", 1.0)), salt=i)
            if kind == "box":
                statics.append(Box(np.array(p["min"], dtype=np.float64),
                                   np.array(p["max"], dtype=np.float64), **common))
            elif kind == "plane":
                n = np.array(p["normal"], dtype=np.float64)
                norm = np.linalg.norm(n)
                if norm == 0:
                    raise ConfigError(f"static {i}: zero plane normal")
                statics.append(Plane(n / norm, float(p["offset"]), **common))
            else:
                raise ConfigError(f"static {i}: unknown type {kind!r}")
        actors = []
        for i, a in enumerate(doc.get("actors", [])):
            actors.append(Actor(
                size=np.array(a["size"], dtype=np.float64),
                material=float(a["material"]),
                waypoints=[(float(w["t"]), np.array(w["pos"], dtype=np.float64))
                           for w in a["waypoints"]],
                amplitude=float(a.get("amplitude", 0.0)),
                scale=float(a.get("scale", 1.0)),
                salt=1000 + i))
        ego = [(float(w["t"]), np.array(w["pos"], dtype=np.float64), float(w["yaw"]))
               for w in doc["ego"]]
        return Scene(sensor=sensor, statics=statics, actors=actors, ego=ego,
                     duration=float(doc["duration"]),
                     range_sigma=float(noise.get("range_sigma", 0.0)),
                     intensity_sigma=float(noise.get("intensity_sigma", 0.0)),
                     seed=int(doc.get("seed", 0)),
                     name=str(doc.get("name", "scene")))
    except KeyError as exc:
        raise ConfigError(f"scene is missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scene value: {exc}") from exc


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scene file is not valid JSON: {exc}") from exc
    return scene_from_dict(doc)


def reference_scene_path() -> str:
    """Path of the bundled hall scene with three walking actors."""
    from importlib import resources
    return str(resources.files("dynoscan").joinpath("scenes/hall_3ped.json"))
