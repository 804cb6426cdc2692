"""Simulated rig: ground-truth motion, string shortening, count quantization.

Stands in for the robot that moves the helmet and for the physical encoders.
Reproduces the error mechanisms of the real rig -- the fixed per-leg string
shortening from guide-channel contact, count quantization, optional count
noise, and a mis-set tool-centre offset that turns commanded rotations into
parasitic translations -- without asserting any particular error magnitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OutOfRange
from .encoder import EncoderSpec
from .geometry import (PlatformGeometry, Pose, default_geometry, geometry_from_dict,
                       geometry_to_dict, load_geometry, pose_to_matrix)
from .kinematics import SolverConfig, forward_kinematics, inverse_kinematics

AXES = ("x", "y", "z", "roll", "pitch", "yaw")


@dataclass(frozen=True)
class DeviationModel:
    """Deviations separating measured string lengths from the ideal model."""

    fixed_shortening_mm: float = 3.0  # guide-channel edge contact, every leg
    count_noise_std: float = 0.0      # gaussian, in counts
    tcp_z_error_mm: float = 0.0       # robot tool-centre mis-set along z

    def __post_init__(self):
        if not math.isfinite(self.fixed_shortening_mm):
            raise ValueError("fixed_shortening_mm must be finite")
        if self.count_noise_std < 0:
            raise ValueError("count_noise_std must be >= 0")


@dataclass(frozen=True)
class MotionScript:
    """Ordered (axis, displacement) commands; displacements in mm or deg."""

    points: tuple = ()
    dwell_s: float = 0.0

    def __post_init__(self):
        pts = tuple((str(a), float(v)) for a, v in self.points)
        for axis, _ in pts:
            if axis not in AXES:
                raise ValueError(f"unknown axis {axis!r}")
        object.__setattr__(self, "points", pts)

    def check_workspace(self, geom: PlatformGeometry) -> None:
        for axis, value in self.points:
            limit = (geom.workspace.translation_mm if axis in ("x", "y", "z")
                     else geom.workspace.rotation_deg)
            if abs(value) > limit + 1e-9:
                raise ValueError(f"{axis}={value} exceeds workspace limit {limit}")


def single_axis_sweep(limit: float = 10.0, step: float = 1.0,
                      axes=AXES) -> MotionScript:
    """One-axis-at-a-time sweep, -limit..+limit in the given increment."""
    n = int(round(limit / step))
    displacements = [i * step for i in range(-n, n + 1)]
    return MotionScript(points=tuple((axis, d) for axis in axes
                                     for d in displacements))


def axis_pose(axis: str, displacement: float) -> Pose:
    """Pose displaced along a single named axis."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    return Pose(**{axis: displacement})


def apply_tcp_error(commanded: Pose, tcp_z_error_mm: float) -> Pose:
    """Actual helmet pose when rotations happen about a mis-set tool centre.

    The rotation centre sits tcp_z_error_mm along z away from the assumed
    helmet centre, adding (I - R)e to the translation. Pure translations are
    unaffected; rotations about z are unaffected (e is along the axis).
    """
    if tcp_z_error_mm == 0.0:
        return commanded
    t = pose_to_matrix(commanded)
    e = np.array([0.0, 0.0, tcp_z_error_mm])
    shift = e - t.rotation @ e
    return replace(commanded, x=commanded.x + shift[0], y=commanded.y + shift[1],
                   z=commanded.z + shift[2])


@dataclass(frozen=True)
class Measurement:
    """Quantized encoder readings for one pose."""

    counts: np.ndarray     # (6,) int, shortened readings on the count grid
    lengths_mm: np.ndarray  # counts / counts_per_mm


def simulate_measurement(geom: PlatformGeometry, pose: Pose, model: DeviationModel,
                         spec: EncoderSpec = EncoderSpec(),
                         rng: np.random.Generator | None = None) -> Measurement:
    """Encoder readings for a pose: shortened true lengths on the count grid.

    Raises OutOfRange if any true leg length leaves [0, range_mm] or any
    shortened reading is non-positive.
    """
    true_lengths = inverse_kinematics(geom, pose)
    if np.any(true_lengths > spec.range_mm):
        raise OutOfRange(f"leg length {true_lengths.max():.2f} mm exceeds "
                         f"{spec.range_mm} mm range")
    readings = true_lengths - model.fixed_shortening_mm
    if np.any(readings <= 0):
        raise OutOfRange("shortened reading is non-positive")
    raw = readings * spec.counts_per_mm
    if model.count_noise_std > 0.0:
        if rng is None:
            raise ValueError("count_noise_std > 0 requires an rng")
        raw = raw + rng.normal(0.0, model.count_noise_std, size=6)
    counts = np.rint(raw).astype(np.int64)
    return Measurement(counts=counts,
                       lengths_mm=counts / spec.counts_per_mm)


@dataclass(frozen=True)
class ProtocolPoint:
    """One row of the accuracy-evaluation run."""

    axis: str
    displacement: float
    commanded: Pose
    actual: Pose
    solved: Pose
    translation_error_mm: float  # |dP| against the commanded translation
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AccuracyReport:
    """Per-point errors plus the axis-by-displacement summary table."""

    points: tuple
    offset_mm: float

    def axes(self):
        seen = []
        for p in self.points:
            if p.axis not in seen:
                seen.append(p.axis)
        return seen

    def displacements(self):
        return sorted({p.displacement for p in self.points})

    def error_table(self) -> dict:
        """{axis: {displacement: |dP|}} over all points."""
        table: dict = {}
        for p in self.points:
            table.setdefault(p.axis, {})[p.displacement] = p.translation_error_mm
        return table

    def rms_by_axis(self) -> dict:
        rms = {}
        for axis, column in self.error_table().items():
            values = np.array(list(column.values()))
            rms[axis] = float(np.sqrt(np.mean(values ** 2)))
        return rms

    def failed_points(self):
        return [p for p in self.points if not p.converged]


def run_accuracy_protocol(geom: PlatformGeometry, model: DeviationModel,
                          script: MotionScript, solver_config: SolverConfig,
                          offset_mm: float, spec: EncoderSpec = EncoderSpec(),
                          rng: np.random.Generator | None = None) -> AccuracyReport:
    """Drive the scripted motion, measure, correct, solve, and tabulate |dP|.

    For each scripted point the commanded pose is realised (with the tool-
    centre error applied), measured through the simulated encoders, corrected
    by offset_mm, and solved back to a pose from the nominal initial guess.
    |dP| compares the solved translation against the commanded one, mimicking
    a robot that reports its commanded displacement as ground truth. Points
    whose solve fails are flagged in the report, never dropped.
    """
    script.check_workspace(geom)
    nominal = Pose.identity()
    points = []
    for axis, displacement in script.points:
        commanded = axis_pose(axis, displacement)
        actual = apply_tcp_error(commanded, model.tcp_z_error_mm)
        meas = simulate_measurement(geom, actual, model, spec, rng)
        adjusted = meas.lengths_mm + offset_mm
        result = forward_kinematics(geom, adjusted, nominal, solver_config)
        dp = np.array([result.pose.x, result.pose.y, result.pose.z]) \
            - np.array([commanded.x, commanded.y, commanded.z])
        points.append(ProtocolPoint(
            axis=axis, displacement=displacement, commanded=commanded,
            actual=actual, solved=result.pose,
            translation_error_mm=float(np.linalg.norm(dp)),
            iterations=result.iterations, converged=result.converged))
    return AccuracyReport(points=tuple(points), offset_mm=offset_mm)


@dataclass(frozen=True)
class StreamSample:
    """One acquisition sample: raw counts plus index-pulse flags."""

    timestamp_us: int
    counts: np.ndarray            # (6,) int raw counts since power-on
    index_flags: np.ndarray       # (6,) bool, pulse seen at this sample
    ground_truth: Pose | None     # None during the homing segment


@dataclass(frozen=True)
class CountStream:
    """Complete simulated acquisition: homing retraction then scripted motion."""

    samples: tuple
    first_index_lengths_mm: np.ndarray
    spec: EncoderSpec
    rate_hz: float
    homing_samples: int           # samples before ground truth becomes valid

    def channel_trace(self, channel: int):
        """(delta, index_seen) events for one channel, for feeding a decoder."""
        trace = []
        prev = 0
        for sample in self.samples:
            count = int(sample.counts[channel])
            trace.append((count - prev, bool(sample.index_flags[channel])))
            prev = count
        return trace

    def traces(self):
        return [self.channel_trace(i) for i in range(6)]


def generate_first_index_lengths(rng: np.random.Generator,
                                 spec: EncoderSpec = EncoderSpec(),
                                 low_mm: float = 6.0,
                                 high_mm: float = 28.0) -> np.ndarray:
    """Per-encoder first-index-pulse lengths, snapped onto the count grid.

    The real values are recorded by reading the encoder itself, so they are
    exact count multiples. Kept below the workspace minimum leg length so a
    retraction from any workspace pose crosses the first pulse.
    """
    raw = rng.uniform(low_mm, high_mm, size=6)
    return np.rint(raw * spec.counts_per_mm) / spec.counts_per_mm


def emit_count_stream(geom: PlatformGeometry, poses, model: DeviationModel,
                      spec: EncoderSpec = EncoderSpec(), *,
                      first_index_lengths_mm=None,
                      rate_hz: float = 1000.0,
                      retract_floor_mm: float = 2.0,
                      retract_samples: int = 400,
                      return_samples: int = 400,
                      rng: np.random.Generator | None = None) -> CountStream:
    """Produce the per-sample count/index stream for a homing run plus motion.

    The stream opens with a scripted retraction: every channel's reading
    ramps from its value at the first pose down to retract_floor_mm and back,
    crossing the first index pulse on the way. Index events fire whenever a
    channel's length crosses first_index_length + k * spacing (k = 0, 1, 2);
    the emitted count for a crossing sample is snapped to the exact pulse
    position, mirroring acquisition hardware that latches the count at the
    pulse edge.
    """
    poses = list(poses)
    if not poses:
        raise ValueError("at least one pose required")
    if first_index_lengths_mm is None:
        if rng is None:
            raise ValueError("provide first_index_lengths_mm or an rng")
        first_index_lengths_mm = generate_first_index_lengths(rng, spec)
    first_index_lengths_mm = np.asarray(first_index_lengths_mm, dtype=float)

    def readings_for(pose):
        lengths = inverse_kinematics(geom, pose)
        if np.any(lengths > spec.range_mm):
            raise OutOfRange("leg length exceeds encoder range")
        readings = lengths - model.fixed_shortening_mm
        if np.any(readings <= 0):
            raise OutOfRange("shortened reading is non-positive")
        return readings

    nominal = readings_for(poses[0])

    # Reading series: retraction ramp (not a rigid motion), then scripted poses.
    reading_rows = []
    truth = []
    for k in range(retract_samples):
        frac = (k + 1) / retract_samples
        reading_rows.append(nominal + (retract_floor_mm - nominal) * frac)
        truth.append(None)
    for k in range(return_samples):
        frac = (k + 1) / return_samples
        floor = np.full(6, retract_floor_mm)
        reading_rows.append(floor + (nominal - floor) * frac)
        truth.append(None)
    for pose in poses:
        reading_rows.append(readings_for(pose))
        truth.append(pose)
    homing_samples = retract_samples + return_samples

    cpm = spec.counts_per_mm
    index_positions = [np.rint(first_index_lengths_mm * cpm).astype(np.int64)
                       + k * spec.index_spacing_counts for k in range(3)]
    index_positions = np.stack(index_positions, axis=1)  # (6, 3)

    n = len(reading_rows)
    readings = np.asarray(reading_rows)
    target = readings * cpm
    if model.count_noise_std > 0.0:
        if rng is None:
            raise ValueError("count_noise_std > 0 requires an rng")
        target = target + rng.normal(0.0, model.count_noise_std, size=target.shape)
    target = np.rint(target).astype(np.int64)

    period_us = int(round(1e6 / rate_hz))
    samples = []
    emitted_prev = target[0].copy()
    samples.append(StreamSample(timestamp_us=0, counts=emitted_prev.copy(),
                                index_flags=np.zeros(6, dtype=bool),
                                ground_truth=truth[0]))
    for i in range(1, n):
        counts = target[i].copy()
        flags = np.zeros(6, dtype=bool)
        for ch in range(6):
            lo = min(emitted_prev[ch], counts[ch])
            hi = max(emitted_prev[ch], counts[ch])
            crossed = [p for p in index_positions[ch]
                       if lo < p <= hi and p != emitted_prev[ch]]
            if crossed:
                # snap to the first pulse in the travel direction
                direction = 1 if counts[ch] >= emitted_prev[ch] else -1
                pulse = min(crossed) if direction > 0 else max(crossed)
                counts[ch] = pulse
                flags[ch] = True
        samples.append(StreamSample(timestamp_us=i * period_us, counts=counts,
                                    index_flags=flags, ground_truth=truth[i]))
        emitted_prev = counts

    return CountStream(samples=tuple(samples),
                       first_index_lengths_mm=first_index_lengths_mm,
                       spec=spec, rate_hz=rate_hz, homing_samples=homing_samples)


def trajectory_from_script(script: MotionScript, rate_hz: float,
                           move_s: float = 0.2) -> list[Pose]:
    """Sample-rate pose list: ramp to each scripted point, then dwell there."""
    move_n = max(1, int(round(move_s * rate_hz)))
    dwell_n = max(1, int(round(script.dwell_s * rate_hz)))
    poses = [Pose.identity()]
    current = Pose.identity().as_vector()
    for axis, displacement in script.points:
        target = axis_pose(axis, displacement).as_vector()
        for k in range(1, move_n + 1):
            poses.append(Pose.from_vector(current + (target - current) * k / move_n))
        poses.extend([Pose.from_vector(target)] * dwell_n)
        current = target
    return poses


@dataclass(frozen=True)
class Scenario:
    """A reproducible simulation setup: geometry, deviations, motion, seed."""

    geometry: PlatformGeometry
    model: DeviationModel
    script: MotionScript
    seed: int = 0
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    geometry_ref: str = "default"

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def scenario_from_dict(doc: dict, base_dir=None) -> Scenario:
    geometry_ref = doc.get("geometry", "default")
    if geometry_ref == "default":
        geometry = default_geometry()
    elif isinstance(geometry_ref, dict):
        geometry = geometry_from_dict(geometry_ref)
    else:
        path = geometry_ref
        if base_dir is not None:
            import os
            path = os.path.join(base_dir, geometry_ref)
        geometry = load_geometry(path)
    dev = doc.get("deviation", {})
    model = DeviationModel(
        fixed_shortening_mm=float(dev.get("fixed_shortening_mm", 3.0)),
        count_noise_std=float(dev.get("count_noise_std", 0.0)),
        tcp_z_error_mm=float(dev.get("tcp_z_error_mm", 0.0)),
    )
    sc = doc.get("script", {})
    if sc == "single_axis_sweep":
        script = single_axis_sweep()
    else:
        script = MotionScript(points=tuple((p[0], p[1]) for p in sc.get("points", ())),
                              dwell_s=float(sc.get("dwell_s", 0.0)))
    enc = doc.get("encoder", {})
    spec = EncoderSpec(
        counts_per_mm=float(enc.get("counts_per_mm", 60.0)),
        range_mm=float(enc.get("range_mm", 200.0)),
        index_spacing_counts=int(enc.get("index_spacing_counts", 4000)),
    )
    return Scenario(geometry=geometry, model=model, script=script,
                    seed=int(doc.get("seed", 0)), encoder=spec,
                    geometry_ref=geometry_ref if isinstance(geometry_ref, str) else "inline")


def load_scenario(path) -> Scenario:
    import os
    with open(path) as f:
        doc = json.load(f)
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "geometry": (scenario.geometry_ref if scenario.geometry_ref == "default"
                     else geometry_to_dict(scenario.geometry)),
        "deviation": {
            "fixed_shortening_mm": scenario.model.fixed_shortening_mm,
            "count_noise_std": scenario.model.count_noise_std,
            "tcp_z_error_mm": scenario.model.tcp_z_error_mm,
        },
        "script": {
            "points": [[a, v] for a, v in scenario.script.points],
            "dwell_s": scenario.script.dwell_s,
        },
        "encoder": {
            "counts_per_mm": scenario.encoder.counts_per_mm,
            "range_mm": scenario.encoder.range_mm,
            "index_spacing_counts": scenario.encoder.index_spacing_counts,
        },
        "seed": scenario.seed,
    }
