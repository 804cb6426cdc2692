"""strenc: pose estimation for a six-string-encoder parallel measurement rig.

Converts six measured string lengths into the 6-DOF pose of a helmet
relative to an imaging ring, with homing, offset calibration, frame
registration, and an accuracy-evaluation protocol run against a built-in
simulator of the rig.
"""

__version__ = "0.1.0"

from .geometry import (Pose, RigidTransform, PlatformGeometry, Workspace,
                       pose_to_matrix, matrix_to_pose, transform_point,
                       default_geometry, load_geometry)
from .kinematics import (SolverConfig, SolveResult, inverse_kinematics,
                         inverse_jacobian, forward_kinematics)
from .encoder import EncoderSpec, EncoderChannel, counts_to_mm, home_all
from .calibration import (CalibrationSample, CalibrationSweep, apply_offset,
                          position_error, run_sweep)
from .registration import FrameChain, register, encoder_pose_in_robot_frame
from .simulator import (DeviationModel, MotionScript, Scenario,
                        simulate_measurement, run_accuracy_protocol,
                        emit_count_stream, single_axis_sweep)

__all__ = [
    "Pose", "RigidTransform", "PlatformGeometry", "Workspace",
    "pose_to_matrix", "matrix_to_pose", "transform_point",
    "default_geometry", "load_geometry",
    "SolverConfig", "SolveResult", "inverse_kinematics", "inverse_jacobian",
    "forward_kinematics",
    "EncoderSpec", "EncoderChannel", "counts_to_mm", "home_all",
    "CalibrationSample", "CalibrationSweep", "apply_offset", "position_error",
    "run_sweep",
    "FrameChain", "register", "encoder_pose_in_robot_frame",
    "DeviationModel", "MotionScript", "Scenario", "simulate_measurement",
    "run_accuracy_protocol", "emit_count_stream", "single_axis_sweep",
]
