"""Sparse foreground extraction: blur the intensity image, subtract, binarize.

Flat scenes blur to themselves, so the difference image responds only where
intensity changes quickly: object edges and small bright targets.  Keeping
just those pixels is what makes the downstream clustering and tracking cheap
enough to run per revolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .frames import IntensityImage, NO_POINT


@dataclass(frozen=True)
class GaussianKernel:
    """Separable-in-shape (wide, short) blur kernel.

    ``weights[m + a, n + b]`` holds the normalized tap for column offset ``m``
    and row offset ``n``; taps sum to 1 so flat regions are preserved exactly.
    """

    a: int
    b: int
    sigma_m: float
    sigma_n: float
    weights: np.ndarray   # (2a+1, 2b+1)


def build_kernel(a: int, b: int, sigma_m: float, sigma_n: float) -> GaussianKernel:
    """Sample a 2D Gaussian on the integer grid ``[-a, a] x [-b, b]`` and normalize.

    The kernel must be flat (``a > b``): intensity images are far wider than
    tall, so the blur window follows suit.
    """
    if not (a > b >= 1):
        raise ConfigError(f"kernel must be flat: need a > b >= 1, got a={a}, b={b}")
    if sigma_m <= 0 or sigma_n <= 0:
        raise ConfigError("kernel sigmas must be positive")
    m = np.arange(-a, a + 1, dtype=np.float64)[:, None]
    n = np.arange(-b, b + 1, dtype=np.float64)[None, :]
    w = np.exp(-(m ** 2 / (2 * sigma_m ** 2) + n ** 2 / (2 * sigma_n ** 2)))
    w /= w.sum()
    return GaussianKernel(a, b, sigma_m, sigma_n, w)


def convolve(image: IntensityImage, kernel: GaussianKernel) -> np.ndarray:
    """Blur the occupied intensity grid with the kernel.

    Horizontal borders wrap (the image is 360 degrees periodic); vertical
    borders clamp to the edge row.  Empty pixels contribute intensity 0.
    """
    a, b = kernel.a, kernel.b
    if 2 * a + 1 > image.w or 2 * b + 1 > image.h:
        raise ConfigError(
            f"kernel {2 * a + 1}x{2 * b + 1} does not fit image {image.w}x{image.h}")
    masked = np.where(image.source_index != NO_POINT, image.intensity, 0.0)
    padded = np.pad(masked, ((b, b), (0, 0)), mode="edge")
    padded = np.pad(padded, ((0, 0), (a, a)), mode="wrap")
    out = np.zeros_like(masked)
    for mi in range(-a, a + 1):
        for ni in range(-b, b + 1):
            out += kernel.weights[mi + a, ni + b] * padded[b - ni:b - ni + image.h,
                                                           a - mi:a - mi + image.w]
    return out


@dataclass
class ForegroundSet:
    """Masked pixels and the 3D points behind them, in raster order."""

    mask: np.ndarray       # (h, w) bool
    pixels: np.ndarray     # (k, 2) int, columns (u, v)
    xyz: np.ndarray        # (k, 3) float, sensor-frame meters
    point_index: np.ndarray  # (k,) indices into the source frame
    occupied_count: int

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def ratio(self) -> float:
        """Foreground pixels over occupied pixels; the sparsity that buys speed."""
        return len(self) / self.occupied_count if self.occupied_count else 0.0


def extract_foreground(
    image: IntensityImage,
    frame_xyz: np.ndarray,
    kernel: GaussianKernel,
    theta: float,
) -> ForegroundSet:
    """Keep pixels whose intensity exceeds the local blur by more than ``theta``.

    Only occupied pixels can be masked; their source points are gathered so
    the result can be clustered in 3D directly.
    """
    if theta < 0:
        raise ConfigError("theta must be >= 0")
    blurred = convolve(image, kernel)
    occupied = image.source_index != NO_POINT
    mask = (image.intensity - blurred > theta) & occupied
    v, u = np.nonzero(mask)
    idx = image.source_index[v, u]
    xyz = np.asarray(frame_xyz, dtype=np.float64).reshape(-1, 3)[idx]
    return ForegroundSet(
        mask=mask,
        pixels=np.stack([u, v], axis=1).astype(np.int64),
        xyz=xyz,
        point_index=idx.astype(np.int64),
        occupied_count=int(np.count_nonzero(occupied)),
    )
