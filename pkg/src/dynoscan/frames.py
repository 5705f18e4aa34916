"""Point frames, sensor geometry, and the spherical projection to intensity images.

A LiDAR revolution is a :class:`PointFrame`; projecting it through a
:class:`SensorModel` yields an :class:`IntensityImage` whose pixels remember
intensity, range, and the index of the originating point.  All grids are
stored as ``(h, w)`` numpy arrays indexed ``[v, u]``.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, FormatError

# source_index value for pixels that received no point
NO_POINT = -1

FRAME_MAGIC = b"DYNF"
FRAME_VERSION = 1


@dataclass(frozen=True)
class Point3:
    """A single LiDAR return: sensor-frame coordinates in meters plus intensity."""

    x: float
    y: float
    z: float
    intensity: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.z)):
            raise ValueError("point coordinates must be finite")
        if self.intensity < 0:
            raise ValueError("intensity must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class SensorModel:
    """Spherical-projection geometry of the scanner.

    ``beta_up`` is the elevation of image row 0's upper edge; ``beta_fov`` the
    total vertical field of view, so row ``h-1``'s lower edge sits at
    ``beta_up - beta_fov``.  Azimuth spans the full 360 degrees over ``w``
    columns with the seam at ``-pi``.
    """

    w: int = 1024
    h: int = 64
    beta_up: float = np.pi / 4
    beta_fov: float = np.pi / 2
    rate_hz: float = 10.0

    def __post_init__(self):
        if self.w < 8 or self.h < 2:
            raise ValueError(f"sensor grid too small: {self.w}x{self.h}")
        if not 0 < self.beta_fov <= np.pi:
            raise ValueError("beta_fov must be in (0, pi]")
        if self.beta_up >= np.pi / 2:
            raise ValueError("beta_up must be below +pi/2")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz


@dataclass
class PointFrame:
    """One revolution of returns: ``xyz`` is (n, 3) meters, ``intensity`` (n,)."""

    timestamp: float
    xyz: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        if self.intensity.shape[0] != self.xyz.shape[0]:
            raise ValueError("xyz and intensity lengths differ")
        if not np.isfinite(self.xyz).all():
            raise ValueError("point coordinates must be finite")
        if self.intensity.size and self.intensity.min() < 0:
            raise ValueError("intensity must be >= 0")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def point(self, i: int) -> Point3:
        x, y, z = self.xyz[i]
        return Point3(float(x), float(y), float(z), float(self.intensity[i]))

    @staticmethod
    def from_points(timestamp: float, points: list[Point3]) -> "PointFrame":
        xyz = np.array([[p.x, p.y, p.z] for p in points], dtype=np.float64).reshape(-1, 3)
        inten = np.array([p.intensity for p in points], dtype=np.float64)
        return PointFrame(timestamp, xyz, inten)


@dataclass
class IntensityImage:
    """Spherical-projection grids plus the back-pointers into the source frame."""

    w: int
    h: int
    intensity: np.ndarray          # (h, w) float
    range: np.ndarray              # (h, w) float, 0 = empty pixel
    source_index: np.ndarray       # (h, w) int32, NO_POINT = empty pixel
    timestamp: float = 0.0
    dropped: int = 0               # points outside the vertical FOV

    @property
    def occupied(self) -> np.ndarray:
        """Boolean (h, w) mask of pixels that hold a point."""
        return self.source_index != NO_POINT

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.source_index != NO_POINT))


def pixel_of(xyz: np.ndarray, sensor: SensorModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map points (n, 3) to pixel indices ``(u, v)`` and ranges.

    ``u`` is wrapped modulo ``w`` at the azimuth seam; ``v`` may fall outside
    ``[0, h)`` for points beyond the vertical FOV, and is left unclamped so the
    caller can drop them.  Points at the exact origin get range 0.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    r = np.linalg.norm(xyz, axis=1)
    az = np.arctan2(xyz[:, 1], xyz[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        el = np.arcsin(np.clip(np.where(r > 0, xyz[:, 2] / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0))
    u = np.floor((az + np.pi) / (2 * np.pi) * sensor.w).astype(np.int64) % sensor.w
    v = np.floor((sensor.beta_up - el) / sensor.beta_fov * sensor.h).astype(np.int64)
    return u, v, r


def project(frame: PointFrame, sensor: SensorModel) -> IntensityImage:
    """Spherically project a frame onto the sensor grid.

    Pixel collisions keep the nearest point (smallest range; ties broken by
    lowest point index) so occlusion semantics are preserved.  Points with
    ``v`` outside ``[0, h)`` or zero range are skipped and counted in
    ``dropped``.
    """
    if len(frame) == 0:
        raise EmptyInputError("cannot project a frame with zero points")
    u, v, r = pixel_of(frame.xyz, sensor)
    valid = (v >= 0) & (v < sensor.h) & (r > 0)
    dropped = int(np.count_nonzero(~valid))

    idx = np.nonzero(valid)[0]
    # Write farthest first so the nearest point lands last and wins each pixel;
    # among equal ranges the lowest point index wins.
    order = np.lexsort((-idx, -r[idx]))
    idx = idx[order]
    uu, vv = u[idx], v[idx]

    intensity = np.zeros((sensor.h, sensor.w), dtype=np.float64)
    rng = np.zeros((sensor.h, sensor.w), dtype=np.float64)
    src = np.full((sensor.h, sensor.w), NO_POINT, dtype=np.int32)
    intensity[vv, uu] = frame.intensity[idx]
    rng[vv, uu] = r[idx]
    src[vv, uu] = idx
    return IntensityImage(sensor.w, sensor.h, intensity, rng, src,
                          timestamp=frame.timestamp, dropped=dropped)


def pixel_direction(u: np.ndarray, v: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """Unit ray directions through pixel centers; accepts scalars or arrays."""
    az = (np.asarray(u, dtype=np.float64) + 0.5) / sensor.w * 2 * np.pi - np.pi
    el = sensor.beta_up - (np.asarray(v, dtype=np.float64) + 0.5) / sensor.h * sensor.beta_fov
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def unproject(u: int, v: int, range_m: float, sensor: SensorModel) -> Point3:
    """Point at the center of pixel ``(u, v)`` at the given range.

    Inverse of :func:`project` up to pixel quantization: re-projecting the
    returned point lands back on ``(u, v)``.
    """
    if not (0 <= u < sensor.w and 0 <= v < sensor.h):
        raise ValueError(f"pixel ({u}, {v}) outside {sensor.w}x{sensor.h} grid")
    if range_m <= 0:
        raise ValueError("range must be positive")
    d = pixel_direction(u, v, sensor)
    return Point3(float(d[0] * range_m), float(d[1] * range_m), float(d[2] * range_m))


def grid_directions(sensor: SensorModel) -> np.ndarray:
    """(h, w, 3) unit directions for every pixel center."""
    uu, vv = np.meshgrid(np.arange(sensor.w), np.arange(sensor.h))
    return pixel_direction(uu, vv, sensor)


def normalize_u8(values: np.ndarray) -> np.ndarray:
    """Min-max normalize a grid to uint8 for display; flat input maps to 0."""
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.clip((values - lo) / (hi - lo) * 255.0, 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Frame file IO.  Binary layout (little-endian):
#   magic "DYNF", u32 version, then per frame:
#   f64 timestamp, u32 count, count x (f32 x, f32 y, f32 z, f32 intensity)
# --------------------------------------------------------------------------

_FRAME_HEAD = struct.Struct("<dI")


def write_frames(frames: list[PointFrame], path) -> None:
    with open(path, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(struct.pack("<I", FRAME_VERSION))
        for frame in frames:
            fh.write(_FRAME_HEAD.pack(frame.timestamp, len(frame)))
            rec = np.empty((len(frame), 4), dtype="<f4")
            rec[:, :3] = frame.xyz
            rec[:, 3] = frame.intensity
            fh.write(rec.tobytes())


def read_frames(path) -> list[PointFrame]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise FormatError("file too short for DYNF header", offset=0)
    if data[:4] != FRAME_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {FRAME_MAGIC!r}", offset=0)
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FRAME_VERSION:
        raise FormatError(f"unsupported DYNF version {version}", offset=4)

    frames: list[PointFrame] = []
    off = 8
    index = 0
    while off < len(data):
        if off + _FRAME_HEAD.size > len(data):
            raise FormatError(f"truncated header of frame {index}", offset=off)
        t, count = _FRAME_HEAD.unpack_from(data, off)
        off += _FRAME_HEAD.size
        nbytes = count * 16
        if off + nbytes > len(data):
            raise FormatError(f"truncated point records of frame {index}", offset=off)
        rec = np.frombuffer(data, dtype="<f4", count=count * 4, offset=off).reshape(-1, 4)
        off += nbytes
        frames.append(PointFrame(t, rec[:, :3].astype(np.float64), rec[:, 3].astype(np.float64)))
        index += 1
    return frames


class FrameFile:
    """Random-access reader over a frame file; payloads load on demand.

    Scans only the per-frame headers at construction, so opening a long
    sequence is cheap and iterating it keeps one frame in memory at a time.
    """

    def __init__(self, path):
        self.path = path
        self.timestamps: list[float] = []
        self._offsets: list[tuple[int, int]] = []    # (payload offset, count)
        with open(path, "rb") as fh:
            head = fh.read(8)
            if len(head) < 8:
                raise FormatError("file too short for DYNF header", offset=0)
            if head[:4] != FRAME_MAGIC:
                raise FormatError(f"bad magic {head[:4]!r}, expected {FRAME_MAGIC!r}", offset=0)
            (version,) = struct.unpack_from("<I", head, 4)
            if version != FRAME_VERSION:
                raise FormatError(f"unsupported DYNF version {version}", offset=4)
            off = 8
            size = os.fstat(fh.fileno()).st_size
            while off < size:
                if off + _FRAME_HEAD.size > size:
                    raise FormatError(f"truncated header of frame {len(self._offsets)}",
                                      offset=off)
                t, count = _FRAME_HEAD.unpack(fh.read(_FRAME_HEAD.size))
                off += _FRAME_HEAD.size
                if off + count * 16 > size:
                    raise FormatError(f"truncated point records of frame {len(self._offsets)}",
                                      offset=off)
                self.timestamps.append(t)
                self._offsets.append((off, count))
                fh.seek(count * 16, 1)
                off += count * 16

    def __len__(self) -> int:
        return len(self._offsets)

    def frame(self, i: int) -> PointFrame:
        if not (0 <= i < len(self._offsets)):
            raise IndexError(f"frame {i} out of range 0..{len(self._offsets) - 1}")
        off, count = self._offsets[i]
        with open(self.path, "rb") as fh:
            fh.seek(off)
            rec = np.frombuffer(fh.read(count * 16), dtype="<f4").reshape(-1, 4)
        return PointFrame(self.timestamps[i], rec[:, :3].astype(np.float64),
                          rec[:, 3].astype(np.float64))

    def __iter__(self):
        for i in range(len(self)):
            yield self.frame(i)


def read_frames_csv(path) -> list[PointFrame]:
    """Import frames from CSV with header ``t,x,y,z,intensity``, rows grouped by equal t."""
    frames: list[PointFrame] = []
    cur_t = None
    rows: list[list[float]] = []

    def flush():
        if cur_t is None:
            return
        arr = np.asarray(rows, dtype=np.float64).reshape(-1, 4)
        frames.append(PointFrame(cur_t, arr[:, :3], arr[:, 3]))

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "x", "y", "z", "intensity"]:
            raise FormatError(f"expected CSV header 't,x,y,z,intensity', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, x, y, z, i = (float(c) for c in row)
            except ValueError as exc:
                raise FormatError(f"bad CSV row {lineno}: {row}") from exc
            if cur_t is None or t != cur_t:
                flush()
                cur_t = t
                rows = []
            rows.append([x, y, z, i])
        flush()
    return frames
