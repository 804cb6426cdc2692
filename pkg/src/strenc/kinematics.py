"""String-length kinematics for the parallel measurement platform.

Going from pose to the six string lengths is closed form (each length is the
distance between paired attachment points). The reverse direction is solved
iteratively: a Newton update driven by the pseudo-inverse of the inverse
Jacobian, terminated on the string-length residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLeg, SingularConfiguration
from .geometry import PlatformGeometry, Pose, _axis_rotations, pose_to_matrix

DEG = math.pi / 180.0

CONDITION_LIMIT = 1e12
MIN_LEG_LENGTH_MM = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Termination and conditioning knobs for the iterative pose solve."""

    length_tolerance_mm: float = 0.01
    max_iterations: int = 50
    damping: float = 0.0          # Tikhonov factor on the pseudo-inverse
    finite_difference_step: float = 1e-4  # mm and deg, numeric-Jacobian fallback

    def __post_init__(self):
        if self.length_tolerance_mm <= 0:
            raise ValueError("length_tolerance_mm must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one iterative pose solve."""

    pose: Pose
    iterations: int
    residual_mm: float   # final ||measured - estimated lengths||
    converged: bool


def validate_lengths(lengths) -> np.ndarray:
    """Coerce to a (6,) float array of strictly positive string lengths."""
    arr = np.asarray(lengths, dtype=float)
    if arr.shape != (6,):
        raise ValueError(f"expected 6 leg lengths, got shape {arr.shape}")
    if not np.all(arr > 0):
        raise ValueError("leg lengths must be strictly positive")
    return arr


def inverse_kinematics(geom: PlatformGeometry, pose: Pose) -> np.ndarray:
    """Six string lengths (mm) for a given helmet pose.

    Length i is the Euclidean norm of (pose applied to helmet point i) minus
    base point i. Raises DegenerateLeg if attachment points coincide.
    """
    t = pose_to_matrix(pose)
    legs = geom.helmet_points @ t.rotation.T + t.translation - geom.base_points
    lengths = np.linalg.norm(legs, axis=1)
    if np.any(lengths < MIN_LEG_LENGTH_MM):
        bad = int(np.argmin(lengths))
        raise DegenerateLeg(f"leg {bad + 1} length {lengths[bad]:.3e} mm")
    return lengths


def _rotation_derivatives(roll_deg: float, pitch_deg: float, yaw_deg: float):
    """d(R)/d(roll), d(R)/d(pitch), d(R)/d(yaw), per radian."""
    rz, ry, rx = _axis_rotations(roll_deg, pitch_deg, yaw_deg)
    a, b, c = np.deg2rad([roll_deg, pitch_deg, yaw_deg])
    dz = np.array([[-math.sin(a), -math.cos(a), 0.0],
                   [math.cos(a), -math.sin(a), 0.0],
                   [0.0, 0.0, 0.0]])
    dy = np.array([[-math.sin(b), 0.0, math.cos(b)],
                   [0.0, 0.0, 0.0],
                   [-math.cos(b), 0.0, -math.sin(b)]])
    dx = np.array([[0.0, 0.0, 0.0],
                   [0.0, -math.sin(c), -math.cos(c)],
                   [0.0, math.cos(c), -math.sin(c)]])
    return dz @ ry @ rx, rz @ dy @ rx, rz @ ry @ dx


def inverse_jacobian(geom: PlatformGeometry, pose: Pose) -> np.ndarray:
    """6x6 matrix of leg-length gradients w.r.t. (x, y, z, roll, pitch, yaw).

    Row i holds d(length_i)/d(pose): the translational block is the unit
    vector along leg i (mm/mm), the rotational block is in mm/deg via the
    chain rule through the Euler-angle rotation matrix.

    Raises SingularConfiguration when the condition number exceeds 1e12.
    """
    t = pose_to_matrix(pose)
    legs = geom.helmet_points @ t.rotation.T + t.translation - geom.base_points
    lengths = np.linalg.norm(legs, axis=1)
    if np.any(lengths < MIN_LEG_LENGTH_MM):
        raise DegenerateLeg("cannot form unit leg vectors at zero length")
    units = legs / lengths[:, None]

    dr_roll, dr_pitch, dr_yaw = _rotation_derivatives(pose.roll, pose.pitch, pose.yaw)
    jac = np.empty((6, 6))
    jac[:, :3] = units
    # mm per degree: radian-space derivatives scaled by pi/180
    jac[:, 3] = np.einsum("ij,ij->i", units, geom.helmet_points @ dr_roll.T) * DEG
    jac[:, 4] = np.einsum("ij,ij->i", units, geom.helmet_points @ dr_pitch.T) * DEG
    jac[:, 5] = np.einsum("ij,ij->i", units, geom.helmet_points @ dr_yaw.T) * DEG

    cond = np.linalg.cond(jac)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularConfiguration(f"inverse Jacobian condition number {cond:.3e}")
    return jac


def inverse_jacobian_fd(geom: PlatformGeometry, pose: Pose,
                        step: float = 1e-4) -> np.ndarray:
    """Central-difference fallback for the inverse Jacobian (same units)."""
    base = pose.as_vector()
    jac = np.empty((6, 6))
    for j in range(6):
        hi = base.copy()
        lo = base.copy()
        hi[j] += step
        lo[j] -= step
        d = inverse_kinematics(geom, Pose.from_vector(hi)) \
            - inverse_kinematics(geom, Pose.from_vector(lo))
        jac[:, j] = d / (2.0 * step)
    return jac


def _damped_pinv(matrix: np.ndarray, damping: float) -> np.ndarray:
    u, s, vh = np.linalg.svd(matrix)
    if damping > 0.0:
        inv_s = s / (s * s + damping * damping)
    else:
        inv_s = 1.0 / s
    return (vh.T * inv_s) @ u.T


def forward_kinematics(geom: PlatformGeometry, measured, initial_guess: Pose,
                       config: SolverConfig = SolverConfig()) -> SolveResult:
    """Solve six measured string lengths (mm) for the helmet pose.

    Newton iteration: pose += pinv(inverse_jacobian) @ (measured - estimated),
    stopping when the length residual drops below config.length_tolerance_mm
    or after config.max_iterations passes. On non-convergence the best iterate
    (smallest residual) is returned with converged=False; no exception is
    raised for that case. SingularConfiguration propagates only when the
    initial guess itself is singular; wandering into a singular region on a
    later iteration ends the solve as non-converged.
    """
    measured = validate_lengths(measured)
    x = initial_guess.as_vector()
    best_x = x
    best_residual = math.inf
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        pose = Pose.from_vector(x)
        try:
            estimated = inverse_kinematics(geom, pose)
        except DegenerateLeg:
            if iterations == 1:
                raise
            break
        error = measured - estimated
        residual = float(np.linalg.norm(error))
        if residual < best_residual:
            best_residual = residual
            best_x = x
        if residual < config.length_tolerance_mm:
            return SolveResult(pose, iterations, residual, True)
        try:
            jac_inv = inverse_jacobian(geom, pose)
        except (SingularConfiguration, DegenerateLeg):
            if iterations == 1:
                raise
            break
        x = x + _damped_pinv(jac_inv, config.damping) @ error

    return SolveResult(Pose.from_vector(best_x), iterations, best_residual, False)
