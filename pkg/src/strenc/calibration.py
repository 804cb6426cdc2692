"""String-length offset calibration: grid sweep, error metrics, selection.

Guide-channel contact makes every encoder read short by a fixed amount, so a
single additive offset is swept over a grid and scored against ground-truth
poses. Selection minimises the worst-case translation error, with RMS as the
tie-break; rotation errors are tracked for reporting but never drive the
selection.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import NoConvergence, NonPositiveLength, SweepFailed
from .geometry import PlatformGeometry, Pose
from .kinematics import SolverConfig, SolveResult, forward_kinematics


@dataclass(frozen=True)
class CalibrationSample:
    """One measurement: six string lengths plus the ground-truth pose.

    The ground-truth pose is expressed in the string-encoder base frame.
    """

    measured_lengths: np.ndarray
    ground_truth_pose: Pose

    def __post_init__(self):
        object.__setattr__(self, "measured_lengths",
                           np.asarray(self.measured_lengths, dtype=float))
        if self.measured_lengths.shape != (6,):
            raise ValueError("measured_lengths must hold 6 entries")


@dataclass(frozen=True)
class CalibrationSweep:
    """Per-offset error metrics over a sample set."""

    offsets_mm: tuple
    rms_mm: tuple
    max_mm: tuple
    rms_rot_deg: tuple         # reported only; never enters selection
    best_offset_mm: float
    divergent_pairs: int
    total_pairs: int


def apply_offset(lengths, offset_mm: float) -> np.ndarray:
    """Add the fixed string-length correction to every leg.

    The raw readings under-measure, so the correction is additive. Raises
    NonPositiveLength if the adjustment drives any leg to zero or below.
    """
    adjusted = np.asarray(lengths, dtype=float) + offset_mm
    if np.any(adjusted <= 0):
        raise NonPositiveLength(f"offset {offset_mm} mm yields non-positive length")
    return adjusted


def solve_sample(sample: CalibrationSample, offset_mm: float,
                 geom: PlatformGeometry,
                 solver_config: SolverConfig = SolverConfig()) -> SolveResult:
    """Offset-correct a sample's lengths and solve for the pose.

    Raises NoConvergence when the solve fails; the partial result rides on
    the exception.
    """
    adjusted = apply_offset(sample.measured_lengths, offset_mm)
    result = forward_kinematics(geom, adjusted, Pose.identity(), solver_config)
    if not result.converged:
        raise NoConvergence(
            f"residual {result.residual_mm:.4f} mm after {result.iterations} iterations",
            result=result)
    return result


def position_error(sample: CalibrationSample, offset_mm: float,
                   geom: PlatformGeometry,
                   solver_config: SolverConfig = SolverConfig()) -> float:
    """|dP| in mm: solved translation against the ground-truth translation."""
    result = solve_sample(sample, offset_mm, geom, solver_config)
    gt = sample.ground_truth_pose
    dp = np.array([result.pose.x - gt.x, result.pose.y - gt.y, result.pose.z - gt.z])
    return float(np.linalg.norm(dp))


def _rotation_error_deg(solved: Pose, truth: Pose) -> float:
    d = solved.as_vector()[3:] - truth.as_vector()[3:]
    return float(np.linalg.norm(d))


def default_offset_grid(start_mm: float = -2.0, stop_mm: float = 6.0,
                        step_mm: float = 0.5) -> list[float]:
    """The stock sweep grid: -2..6 mm in 0.5 mm steps (17 candidates)."""
    n = int(round((stop_mm - start_mm) / step_mm))
    return [start_mm + i * step_mm for i in range(n + 1)]


def run_sweep(samples, offsets_mm, geom: PlatformGeometry,
              solver_config: SolverConfig = SolverConfig(),
              max_divergent_fraction: float = 0.1) -> CalibrationSweep:
    """Score every offset over every sample and pick the best offset.

    Pairs whose solve diverges are excluded from the metrics and counted;
    SweepFailed is raised when more than max_divergent_fraction of all
    (sample, offset) pairs diverge. Selection: smallest max error, RMS as
    tie-break, earliest grid entry on exact ties.
    """
    samples = list(samples)
    offsets_mm = [float(o) for o in offsets_mm]
    if not samples or not offsets_mm:
        raise ValueError("samples and offsets must be non-empty")

    rms_list, max_list, rot_list = [], [], []
    divergent = 0
    for offset in offsets_mm:
        errors = []
        rot_errors = []
        for sample in samples:
            try:
                result = solve_sample(sample, offset, geom, solver_config)
            except NoConvergence:
                divergent += 1
                continue
            gt = sample.ground_truth_pose
            dp = np.array([result.pose.x - gt.x, result.pose.y - gt.y,
                           result.pose.z - gt.z])
            errors.append(float(np.linalg.norm(dp)))
            rot_errors.append(_rotation_error_deg(result.pose, gt))
        if errors:
            rms = float(np.sqrt(np.mean(np.square(errors))))
            worst = float(np.max(errors))
            assert rms <= worst + 1e-12, "RMS exceeded max; metric computation broken"
            rms_list.append(rms)
            max_list.append(worst)
            rot_list.append(float(np.sqrt(np.mean(np.square(rot_errors)))))
        else:
            rms_list.append(math.nan)
            max_list.append(math.nan)
            rot_list.append(math.nan)

    total = len(samples) * len(offsets_mm)
    if divergent > max_divergent_fraction * total:
        raise SweepFailed(f"{divergent}/{total} (sample, offset) pairs diverged")

    scored = [(max_list[i], rms_list[i], i) for i in range(len(offsets_mm))
              if not math.isnan(max_list[i])]
    if not scored:
        raise SweepFailed("no offset produced any converged solve")
    _, _, best_index = min(scored)

    return CalibrationSweep(offsets_mm=tuple(offsets_mm), rms_mm=tuple(rms_list),
                            max_mm=tuple(max_list), rms_rot_deg=tuple(rot_list),
                            best_offset_mm=offsets_mm[best_index],
                            divergent_pairs=divergent, total_pairs=total)


SAMPLE_COLUMNS = ["L1", "L2", "L3", "L4", "L5", "L6",
                  "x", "y", "z", "roll", "pitch", "yaw"]


def read_samples_csv(path) -> list[CalibrationSample]:
    """Load samples from CSV with columns L1..L6 (mm), x,y,z (mm), roll,pitch,yaw (deg)."""
    samples = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in SAMPLE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"samples CSV missing columns: {missing}")
        for row in reader:
            lengths = [float(row[f"L{i}"]) for i in range(1, 7)]
            pose = Pose(float(row["x"]), float(row["y"]), float(row["z"]),
                        float(row["roll"]), float(row["pitch"]), float(row["yaw"]))
            samples.append(CalibrationSample(lengths, pose))
    return samples


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SAMPLE_COLUMNS)
        for s in samples:
            row = [f"{v:.6f}" for v in s.measured_lengths]
            row += [f"{v:.6f}" for v in s.ground_truth_pose.as_vector()]
            writer.writerow(row)


def sweep_to_csv(sweep: CalibrationSweep) -> str:
    """Render the sweep as CSV plus a summary line naming the best offset."""
    out = io.StringIO()
    out.write("offset_mm,rms_mm,max_mm\n")
    for offset, rms, worst in zip(sweep.offsets_mm, sweep.rms_mm, sweep.max_mm):
        out.write(f"{offset:.6f},{rms:.6f},{worst:.6f}\n")
    out.write(f"# best_offset_mm = {sweep.best_offset_mm:.6f}\n")
    return out.getvalue()


def write_sweep_csv(path, sweep: CalibrationSweep) -> None:
    with open(path, "w", newline="") as f:
        f.write(sweep_to_csv(sweep))


def default_protocol_poses() -> list[Pose]:
    """The versioned 66-pose calibration motion set shipped with the package."""
    with resources.files("strenc.data").joinpath(
            "calibration_protocol_66.json").open() as f:
        doc = json.load(f)
    return [Pose.from_vector(v) for v in doc["poses"]]
