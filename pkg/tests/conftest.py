"""Shared fixtures and small random-geometry helpers for the test suite."""

import numpy as np
import pytest

from dynoscan.egomotion import Pose
from dynoscan.frames import SensorModel


@pytest.fixture
def small_sensor() -> SensorModel:
    """8x4 grid, 45 deg up, 90 deg vertical FOV: numbers small enough to check by hand."""
    return SensorModel(w=8, h=4, beta_up=np.pi / 4, beta_fov=np.pi / 2)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix, det forced to +1."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng: np.random.Generator, t_scale: float = 1.0) -> Pose:
    return Pose(random_rotation(rng), rng.normal(scale=t_scale, size=3))
