"""Shared fixtures and independent oracle data for the test suite."""

import math

import numpy as np
import pytest

from strenc.geometry import PlatformGeometry, default_geometry

# Attachment-point coordinates of the as-built rig (mm), embedded here
# independently of the packaged geometry file so the two can be compared.
BASE_POINTS = (
    (121.39, 48.35, 73.67),
    (-18.82, 129.30, 73.67),
    (-102.56, 80.95, 73.67),
    (-102.56, -80.95, 73.67),
    (-18.82, -129.30, 73.67),
    (121.39, -48.35, 73.67),
)
HELMET_POINTS = (
    (96.99, 66.70, 42.06),
    (9.27, 117.35, 42.06),
    (-106.26, 50.64, 42.06),
    (-106.26, -50.64, 42.06),
    (9.27, -117.35, 42.06),
    (96.99, -66.70, 42.06),
)


def norm3(a, b) -> float:
    """Plain-math Euclidean distance, independent of the package internals."""
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def euler_zyx_matrix(roll_deg, pitch_deg, yaw_deg) -> np.ndarray:
    """Independent Rz(roll) @ Ry(pitch) @ Rx(yaw) product oracle."""
    a, b, c = (math.radians(v) for v in (roll_deg, pitch_deg, yaw_deg))
    rz = np.array([[math.cos(a), -math.sin(a), 0],
                   [math.sin(a), math.cos(a), 0],
                   [0, 0, 1]])
    ry = np.array([[math.cos(b), 0, math.sin(b)],
                   [0, 1, 0],
                   [-math.sin(b), 0, math.cos(b)]])
    rx = np.array([[1, 0, 0],
                   [0, math.cos(c), -math.sin(c)],
                   [0, math.sin(c), math.cos(c)]])
    return rz @ ry @ rx


def oracle_leg_lengths(pose_vec) -> np.ndarray:
    """Brute-force leg lengths: rotate/translate helmet points, take norms."""
    x, y, z, roll, pitch, yaw = pose_vec
    r = euler_zyx_matrix(roll, pitch, yaw)
    out = []
    for hp, bp in zip(HELMET_POINTS, BASE_POINTS):
        moved = r @ np.array(hp) + np.array([x, y, z])
        out.append(norm3(moved, bp))
    return np.array(out)


@pytest.fixture(scope="session")
def geom() -> PlatformGeometry:
    return default_geometry()
