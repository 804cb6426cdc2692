"""Base-to-robot frame registration from one simultaneous pose pair.

The measurement base (imaging ring) and the robot base are both static, so
their relative transform is captured once: the encoder system reports
base-to-helmet while the robot reports helmet-to-robot, and the chain of the
two fixes base-to-robot. Afterwards any encoder measurement can be expressed
in the robot frame for direct comparison with commanded displacements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .geometry import Pose, RigidTransform, matrix_to_pose


@dataclass(frozen=True)
class FrameChain:
    """Registered base-to-robot transform plus the acquisition pair behind it."""

    base_to_robot: RigidTransform
    base_to_helmet: RigidTransform    # at acquisition time
    helmet_to_robot: RigidTransform   # at acquisition time
    acquired_at: str | None = None


def register(base_to_helmet: RigidTransform,
             helmet_to_robot: RigidTransform,
             acquired_at: str | None = None) -> FrameChain:
    """Build the chain from one simultaneous (base->helmet, helmet->robot) pair."""
    return FrameChain(base_to_robot=base_to_helmet @ helmet_to_robot,
                      base_to_helmet=base_to_helmet,
                      helmet_to_robot=helmet_to_robot,
                      acquired_at=acquired_at)


def encoder_pose_in_robot_frame(chain: FrameChain,
                                base_to_helmet_now: RigidTransform) -> Pose:
    """Current helmet-to-robot pose from an encoder measurement.

    Computes inverse(base_to_helmet_now) composed with the registered
    base-to-robot transform and extracts the 6-DOF pose. GimbalLock
    propagates from the pose extraction.
    """
    return matrix_to_pose(base_to_helmet_now.inverse() @ chain.base_to_robot)


def save_chain(path, chain: FrameChain) -> None:
    """Persist the chain as JSON: 4x4 row-major matrices plus metadata."""
    doc = {
        "version": 1,
        "base_to_robot": chain.base_to_robot.to_matrix4().tolist(),
        "acquisition": {
            "base_to_helmet": chain.base_to_helmet.to_matrix4().tolist(),
            "helmet_to_robot": chain.helmet_to_robot.to_matrix4().tolist(),
        },
        "acquired_at": chain.acquired_at,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_chain(path) -> FrameChain:
    with open(path) as f:
        doc = json.load(f)
    return FrameChain(
        base_to_robot=RigidTransform.from_matrix4(doc["base_to_robot"]),
        base_to_helmet=RigidTransform.from_matrix4(
            doc["acquisition"]["base_to_helmet"]),
        helmet_to_robot=RigidTransform.from_matrix4(
            doc["acquisition"]["helmet_to_robot"]),
        acquired_at=doc.get("acquired_at"),
    )
