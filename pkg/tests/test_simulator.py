"""Simulated measurements, the accuracy protocol, and count-stream generation."""

import json
import math

import numpy as np
import numpy.testing as nptest
import pytest

from strenc.errors import OutOfRange
from strenc.encoder import EncoderSpec
from strenc.geometry import Pose
from strenc.kinematics import SolverConfig, inverse_kinematics
from strenc.simulator import (AXES, DeviationModel, MotionScript, Scenario,
                              apply_tcp_error, axis_pose, emit_count_stream,
                              generate_first_index_lengths, load_scenario,
                              run_accuracy_protocol, scenario_from_dict,
                              scenario_to_dict, simulate_measurement,
                              single_axis_sweep, trajectory_from_script)


class TestSimulateMeasurement:
    def test_passthrough_is_quantized_ik(self, geom):
        meas = simulate_measurement(geom, Pose(), DeviationModel(0.0))
        expected = np.rint(inverse_kinematics(geom, Pose()) * 60.0) / 60.0
        nptest.assert_allclose(meas.lengths_mm, expected, atol=0)
        assert meas.counts.dtype == np.int64

    def test_shortening_subtracts_before_quantization(self, geom):
        meas = simulate_measurement(geom, Pose(), DeviationModel(3.0))
        truth = inverse_kinematics(geom, Pose())
        nptest.assert_allclose(meas.lengths_mm + 3.0, truth, atol=0.5 / 60.0 + 1e-12)

    def test_out_of_range_raises(self, geom):
        with pytest.raises(OutOfRange):
            simulate_measurement(geom, Pose(z=-170.0), DeviationModel(0.0))

    def test_huge_shortening_raises(self, geom):
        with pytest.raises(OutOfRange):
            simulate_measurement(geom, Pose(), DeviationModel(50.0))

    def test_noise_requires_rng(self, geom):
        with pytest.raises(ValueError):
            simulate_measurement(geom, Pose(), DeviationModel(0.0, count_noise_std=1.0))

    def test_noise_is_seeded(self, geom):
        model = DeviationModel(0.0, count_noise_std=2.0)
        a = simulate_measurement(geom, Pose(), model, rng=np.random.default_rng(5))
        b = simulate_measurement(geom, Pose(), model, rng=np.random.default_rng(5))
        nptest.assert_array_equal(a.counts, b.counts)


class TestTcpError:
    def test_translations_unaffected(self):
        pose = apply_tcp_error(Pose(x=7.0), 2.0)
        nptest.assert_allclose(pose.as_vector(), Pose(x=7.0).as_vector(), atol=0)

    def test_roll_unaffected(self):
        # the offset lies along the roll axis, so (I - R) e vanishes
        pose = apply_tcp_error(Pose(roll=10.0), 2.0)
        nptest.assert_allclose(pose.as_vector(), Pose(roll=10.0).as_vector(),
                               atol=1e-12)

    @pytest.mark.parametrize("axis", ["pitch", "yaw"])
    @pytest.mark.parametrize("angle", [2.0, 5.0, 10.0])
    def test_tilt_shift_magnitude(self, axis, angle):
        # |(I - R) e| = 2 |e| sin(theta / 2) for a rotation perpendicular to e
        pose = apply_tcp_error(axis_pose(axis, angle), 2.0)
        shift = np.array([pose.x, pose.y, pose.z])
        expected = 2.0 * 2.0 * math.sin(math.radians(angle) / 2.0)
        assert abs(np.linalg.norm(shift) - expected) < 1e-12

    def test_zero_error_is_identity(self):
        pose = Pose(1, 2, 3, 4, 5, 6)
        assert apply_tcp_error(pose, 0.0) is pose


class TestMotionScript:
    def test_single_axis_sweep_shape(self):
        script = single_axis_sweep()
        assert len(script.points) == 6 * 21
        assert script.points[0] == ("x", -10.0)
        assert script.points[20] == ("x", 10.0)

    def test_rejects_unknown_axis(self):
        with pytest.raises(ValueError):
            MotionScript(points=(("q", 1.0),))

    def test_workspace_check(self, geom):
        MotionScript(points=(("x", 10.0),)).check_workspace(geom)
        with pytest.raises(ValueError):
            MotionScript(points=(("x", 10.5),)).check_workspace(geom)
        with pytest.raises(ValueError):
            MotionScript(points=(("pitch", -11.0),)).check_workspace(geom)


class TestAccuracyProtocol:
    def test_ideal_model_errors_at_quantization_level(self, geom):
        model = DeviationModel(fixed_shortening_mm=3.0)
        report = run_accuracy_protocol(geom, model, single_axis_sweep(),
                                       SolverConfig(), offset_mm=3.0)
        assert len(report.points) == 126
        assert all(p.converged for p in report.points)
        assert max(p.translation_error_mm for p in report.points) <= 0.05

    def test_zero_displacement_row(self, geom):
        model = DeviationModel(fixed_shortening_mm=3.0)
        script = MotionScript(points=(("x", 0.0),))
        report = run_accuracy_protocol(geom, model, script, SolverConfig(),
                                       offset_mm=3.0)
        assert report.points[0].translation_error_mm <= 1.0 / 60.0

    def test_tcp_error_signature(self, geom):
        model = DeviationModel(fixed_shortening_mm=3.0, tcp_z_error_mm=2.0)
        script = MotionScript(points=tuple((axis, d)
                                           for axis in ("roll", "pitch", "yaw")
                                           for d in (-10, -5, -2, 2, 5, 10)))
        report = run_accuracy_protocol(geom, model, script, SolverConfig(),
                                       offset_mm=3.0)
        table = report.error_table()
        assert all(v < 0.1 for v in table["roll"].values())
        for axis in ("pitch", "yaw"):
            assert table[axis][10] > table[axis][2]
            assert table[axis][-10] > table[axis][-2]
            assert table[axis][10] > 0.2

    def test_rms_by_axis_table_shape(self, geom):
        model = DeviationModel(fixed_shortening_mm=3.0)
        report = run_accuracy_protocol(geom, model, single_axis_sweep(),
                                       SolverConfig(), offset_mm=3.0)
        rms = report.rms_by_axis()
        assert set(rms) == set(AXES)
        assert len(report.displacements()) == 21

    def test_noise_never_helps(self, geom):
        # one-sided, over 20 seeds: noisy RMS >= noiseless RMS on average
        script = MotionScript(points=tuple(("x", float(d))
                                           for d in range(-10, 11, 2)))
        clean = run_accuracy_protocol(geom, DeviationModel(3.0), script,
                                      SolverConfig(), offset_mm=3.0)
        clean_rms = clean.rms_by_axis()["x"]
        noisy = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            report = run_accuracy_protocol(
                geom, DeviationModel(3.0, count_noise_std=3.0), script,
                SolverConfig(), offset_mm=3.0, rng=rng)
            noisy.append(report.rms_by_axis()["x"])
        assert np.mean(noisy) >= clean_rms

    def test_out_of_workspace_script_rejected(self, geom):
        script = MotionScript(points=(("x", 12.0),))
        with pytest.raises(ValueError):
            run_accuracy_protocol(geom, DeviationModel(3.0), script,
                                  SolverConfig(), offset_mm=3.0)


class TestCountStream:
    def test_static_trajectory_deltas_zero_after_homing(self, geom):
        stream = emit_count_stream(geom, [Pose()] * 50, DeviationModel(3.0),
                                   rng=np.random.default_rng(1))
        for traces in stream.traces():
            motion = traces[stream.homing_samples + 1:]
            assert all(delta == 0 for delta, _ in motion)

    def test_counts_integrate_to_length_series(self, geom):
        stream = emit_count_stream(geom, [Pose()] * 10, DeviationModel(3.0),
                                   rng=np.random.default_rng(2))
        for ch in range(6):
            deltas = np.array([d for d, _ in stream.channel_trace(ch)])
            counts = np.array([s.counts[ch] for s in stream.samples])
            nptest.assert_array_equal(np.cumsum(deltas), counts)

    def test_full_range_sweep_gives_exactly_three_index_events(self, geom):
        # monotone length sweep crossing all three pulse positions
        n = 400
        z = np.linspace(31.61, -135.0, n)
        poses = [Pose(z=v) for v in z]
        stream = emit_count_stream(
            geom, poses, DeviationModel(0.0),
            first_index_lengths_mm=np.full(6, 32.0),
            retract_samples=0, return_samples=0)
        for ch in range(6):
            events = sum(bool(s.index_flags[ch]) for s in stream.samples)
            assert events == 3

    def test_snapped_sample_lands_on_pulse_position(self, geom):
        stream = emit_count_stream(geom, [Pose()] * 5, DeviationModel(3.0),
                                   first_index_lengths_mm=np.full(6, 20.0),
                                   retract_samples=100, return_samples=100)
        pulse_count = int(round(20.0 * 60.0))
        for ch in range(6):
            flagged = [s.counts[ch] for s in stream.samples if s.index_flags[ch]]
            assert flagged
            assert all((c - pulse_count) % 4000 == 0 for c in flagged)

    def test_timestamps_follow_rate(self, geom):
        stream = emit_count_stream(geom, [Pose()] * 5, DeviationModel(3.0),
                                   rate_hz=500.0, rng=np.random.default_rng(3))
        assert stream.samples[1].timestamp_us - stream.samples[0].timestamp_us == 2000

    def test_ground_truth_none_during_homing(self, geom):
        stream = emit_count_stream(geom, [Pose()] * 5, DeviationModel(3.0),
                                   rng=np.random.default_rng(4))
        assert all(s.ground_truth is None
                   for s in stream.samples[:stream.homing_samples])
        assert all(s.ground_truth is not None
                   for s in stream.samples[stream.homing_samples:])

    def test_out_of_range_pose_rejected(self, geom):
        with pytest.raises(OutOfRange):
            emit_count_stream(geom, [Pose(z=-170.0)], DeviationModel(0.0),
                              rng=np.random.default_rng(5))

    def test_first_index_lengths_on_count_grid(self):
        lengths = generate_first_index_lengths(np.random.default_rng(6))
        nptest.assert_allclose(lengths * 60.0, np.rint(lengths * 60.0), atol=1e-9)
        assert np.all(lengths >= 6.0) and np.all(lengths <= 28.0)


class TestTrajectoryFromScript:
    def test_ramps_and_dwells(self):
        script = MotionScript(points=(("x", 10.0),), dwell_s=0.01)
        poses = trajectory_from_script(script, rate_hz=100.0, move_s=0.05)
        assert poses[0] == Pose()
        assert poses[-1] == Pose(x=10.0)
        assert len(poses) == 1 + 5 + 1


class TestScenarioIO:
    def test_dict_roundtrip(self, geom):
        scenario = Scenario(geometry=geom, model=DeviationModel(2.5, 1.0, 0.5),
                            script=MotionScript(points=(("x", 5.0), ("roll", -3.0)),
                                                dwell_s=0.1),
                            seed=1234)
        doc = scenario_to_dict(scenario)
        back = scenario_from_dict(doc)
        assert back.model == scenario.model
        assert back.script == scenario.script
        assert back.seed == 1234

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({
            "geometry": "default",
            "deviation": {"fixed_shortening_mm": 3.0},
            "script": {"points": [["x", 1.0]]},
            "seed": 7,
        }))
        scenario = load_scenario(path)
        assert scenario.seed == 7
        assert scenario.script.points == (("x", 1.0),)

    def test_malformed_file_raises(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(json.JSONDecodeError):
            load_scenario(path)

    def test_rng_reproducible(self, geom):
        scenario = Scenario(geometry=geom, model=DeviationModel(),
                            script=MotionScript(), seed=42)
        assert scenario.rng().integers(1 << 30) == scenario.rng().integers(1 << 30)
