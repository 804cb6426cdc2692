"""Platform geometry, 6-DOF pose representation, and rigid-transform algebra.

Angle convention used throughout the toolkit: roll is the rotation about z,
pitch about y, yaw about x, composed intrinsically in Z-then-Y-then-X order.
All angles are exposed in degrees, all distances in mm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import GimbalLock

GIMBAL_LOCK_TOL_DEG = 1e-7


@dataclass(frozen=True)
class Pose:
    """6-DOF pose: translation in mm, rotation angles in degrees.

    roll rotates about z, pitch about y, yaw about x (intrinsic ZYX).
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def as_vector(self) -> np.ndarray:
        """Return [x, y, z, roll, pitch, yaw] as a float array (mm, deg)."""
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw],
                        dtype=float)

    @staticmethod
    def from_vector(v) -> "Pose":
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ValueError(f"pose vector must have 6 entries, got shape {v.shape}")
        return Pose(*(float(c) for c in v))

    @staticmethod
    def identity() -> "Pose":
        return Pose()


@dataclass(frozen=True)
class RigidTransform:
    """Rigid transform: 3x3 rotation matrix plus translation in mm.

    Treated as immutable; do not write into the arrays after construction.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=float))
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if self.translation.shape != (3,):
            raise ValueError("translation must be a 3-vector")

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        """Compose: (self @ other) applies other first, then self."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, point) -> np.ndarray:
        """Map a 3-point (or Nx3 stack of points) through the transform."""
        p = np.asarray(point, dtype=float)
        return p @ self.rotation.T + self.translation

    def to_matrix4(self) -> np.ndarray:
        """Return the homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix4(m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("expected a 4x4 matrix")
        return RigidTransform(m[:3, :3].copy(), m[:3, 3].copy())

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()


def _axis_rotations(roll_deg: float, pitch_deg: float, yaw_deg: float):
    a, b, c = np.deg2rad([roll_deg, pitch_deg, yaw_deg])
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cc, sc = math.cos(c), math.sin(c)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]])
    return rz, ry, rx


def pose_to_matrix(pose: Pose) -> RigidTransform:
    """Build the rigid transform R = Rz(roll) @ Ry(pitch) @ Rx(yaw) plus translation."""
    rz, ry, rx = _axis_rotations(pose.roll, pose.pitch, pose.yaw)
    return RigidTransform(rz @ ry @ rx, np.array([pose.x, pose.y, pose.z]))


def matrix_to_pose(t: RigidTransform, *, orthonormal_tol: float = 1e-6) -> Pose:
    """Extract the pose from a rigid transform; pitch is returned in [-90, 90] deg.

    Raises GimbalLock when |pitch| is within 1e-7 deg of 90; roll and yaw are
    then inseparable (the conventional split puts the whole z/x share into
    roll, i.e. yaw := 0, but no pose is returned).
    """
    r = t.rotation
    if not np.allclose(r @ r.T, np.eye(3), atol=orthonormal_tol):
        raise ValueError("rotation part is not orthonormal within tolerance")
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, -r[2, 0]))))
    if 90.0 - abs(pitch) < GIMBAL_LOCK_TOL_DEG:
        raise GimbalLock(f"pitch = {pitch:.9f} deg; roll/yaw are not separable")
    roll = math.degrees(math.atan2(r[1, 0], r[0, 0]))
    yaw = math.degrees(math.atan2(r[2, 1], r[2, 2]))
    x, y, z = t.translation
    return Pose(x, y, z, roll, pitch, yaw)


def transform_point(t: RigidTransform, point) -> np.ndarray:
    """Return R @ p + translation for a single 3-point."""
    return t.rotation @ np.asarray(point, dtype=float) + t.translation


@dataclass(frozen=True)
class Workspace:
    """Per-axis motion limits of the measured platform."""

    translation_mm: float = 10.0
    rotation_deg: float = 10.0


@dataclass(frozen=True)
class PlatformGeometry:
    """Six base and six helmet string attachment points, index-aligned.

    Leg i connects base_points[i] to helmet_points[i]. Base points live in
    the imaging-ring frame, helmet points in the helmet frame.
    """

    base_points: np.ndarray
    helmet_points: np.ndarray
    workspace: Workspace = field(default_factory=Workspace)

    def __post_init__(self):
        bp = np.asarray(self.base_points, dtype=float)
        hp = np.asarray(self.helmet_points, dtype=float)
        if bp.shape != (6, 3) or hp.shape != (6, 3):
            raise ValueError("geometry requires exactly six base and six helmet points")
        object.__setattr__(self, "base_points", bp)
        object.__setattr__(self, "helmet_points", hp)


def default_geometry() -> PlatformGeometry:
    """Geometry of the as-built measurement rig, loaded from the packaged file."""
    with resources.files("strenc.data").joinpath("default_geometry.json").open() as f:
        return geometry_from_dict(json.load(f))


def geometry_from_dict(doc: dict) -> PlatformGeometry:
    ws = doc.get("workspace", {})
    return PlatformGeometry(
        base_points=np.array(doc["base_points"], dtype=float),
        helmet_points=np.array(doc["helmet_points"], dtype=float),
        workspace=Workspace(
            translation_mm=float(ws.get("translation_mm", 10.0)),
            rotation_deg=float(ws.get("rotation_deg", 10.0)),
        ),
    )


def load_geometry(path) -> PlatformGeometry:
    """Load geometry from a JSON file (keys base_points, helmet_points, workspace)."""
    with open(path) as f:
        return geometry_from_dict(json.load(f))


def geometry_to_dict(geom: PlatformGeometry) -> dict:
    return {
        "base_points": geom.base_points.tolist(),
        "helmet_points": geom.helmet_points.tolist(),
        "workspace": {
            "translation_mm": geom.workspace.translation_mm,
            "rotation_deg": geom.workspace.rotation_deg,
        },
    }
