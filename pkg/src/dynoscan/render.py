"""Rendering of intensity images and dynamic-point overlays to image files.

Plain PGM/PPM keeps the outputs dependency-free and diffable; the per-frame
3D dump uses the same range-ray reconstruction as region growing, so dumped
coordinates agree with what segmentation saw.
"""

from __future__ import annotations

import os

import numpy as np

from .frames import IntensityImage, SensorModel, grid_directions, normalize_u8
from .labels import DynamicLabel

HIGHLIGHT = (255, 0, 0)


def write_pgm(path, gray: np.ndarray) -> None:
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.astype(np.uint8).tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.astype(np.uint8).tobytes())


def overlay_label(gray: np.ndarray, label: DynamicLabel) -> np.ndarray:
    """Grayscale expanded to RGB with labeled pixels highlighted."""
    h, w = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2).astype(np.uint8)
    if len(label):
        idx = label.indices.astype(np.int64)
        rgb[idx // w, idx % w] = HIGHLIGHT
    return rgb


def dump_dynamic_points(path, image: IntensityImage, label: DynamicLabel,
                        sensor: SensorModel) -> None:
    """One "x y z" line per labeled pixel, reconstructed from the range grid."""
    dirs = grid_directions(sensor).reshape(-1, 3)
    idx = label.indices.astype(np.int64)
    pts = dirs[idx] * image.range.ravel()[idx][:, None]
    with open(path, "w", encoding="ascii") as fh:
        for x, y, z in pts:
            fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def render_frame(out_dir, index: int, image: IntensityImage, label: DynamicLabel,
                 sensor: SensorModel) -> list[str]:
    """Write intensity PGM, overlay PPM, and the 3D dump for one frame."""
    gray = normalize_u8(image.intensity)
    stem = os.path.join(out_dir, f"frame_{index:06d}")
    write_pgm(stem + "_intensity.pgm", gray)
    write_ppm(stem + "_overlay.ppm", overlay_label(gray, label))
    dump_dynamic_points(stem + "_dynamic.xyz", image, label, sensor)
    return [stem + "_intensity.pgm", stem + "_overlay.ppm", stem + "_dynamic.xyz"]
