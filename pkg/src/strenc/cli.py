"""Command-line entry point wiring the toolkit into its workflows.

Subcommands: solve (lengths -> pose), calibrate (offset sweep), evaluate
(simulated accuracy protocol), home (simulated homing run), serve (count
daemon), stream (pose client). Every run writes a manifest next to its
outputs so results can be reproduced byte-for-byte.

Exit codes: 0 success, 1 computational failure (divergence and friends),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import StrencError
from .calibration import (default_offset_grid, read_samples_csv, run_sweep,
                          write_sweep_csv)
from .geometry import Pose, default_geometry, load_geometry
from .kinematics import SolverConfig, forward_kinematics
from .plots import Panel, write_svg
from .registration import load_chain
from .simulator import (AccuracyReport, emit_count_stream, load_scenario,
                        run_accuracy_protocol, trajectory_from_script)
from .telemetry import ClientConfig, PoseClient, serve

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2


def _write_manifest(path, subcommand: str, inputs: dict, outputs: list,
                    seed=None) -> None:
    doc = {
        "tool": "strenc",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "inputs": {k: (os.path.abspath(v) if isinstance(v, str) and
                       os.path.exists(v) else v) for k, v in inputs.items()},
        "outputs": [os.path.abspath(p) for p in outputs],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _geometry_arg(value):
    if value in (None, "default"):
        return default_geometry()
    return load_geometry(value)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(length_tolerance_mm=args.tolerance_mm,
                        max_iterations=args.max_iterations)


def _parse_floats(text: str, expected: int, what: str) -> list[float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != expected:
        raise ValueError(f"{what} needs {expected} values, got {len(parts)}")
    return [float(p) for p in parts]


def _parse_offsets(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        n = int(round((stop - start) / step))
        return [start + i * step for i in range(n + 1)]
    return [float(p) for p in text.split(",")]


def cmd_solve(args) -> int:
    geom = _geometry_arg(args.geometry)
    config = _solver_config(args)
    guess = (Pose.from_vector(_parse_floats(args.guess, 6, "--guess"))
             if args.guess else Pose.identity())

    if args.lengths:
        lengths = np.array(_parse_floats(args.lengths, 6, "--lengths"))
        result = forward_kinematics(geom, lengths + args.offset_mm, guess, config)
        vec = result.pose.as_vector()
        print("x_mm,y_mm,z_mm,roll_deg,pitch_deg,yaw_deg,iterations,residual_mm,converged")
        print(",".join(f"{v:.6f}" for v in vec)
              + f",{result.iterations},{result.residual_mm:.6f},{int(result.converged)}")
        if not result.converged:
            print(f"solve did not converge: residual {result.residual_mm:.4f} mm "
                  f"after {result.iterations} iterations", file=sys.stderr)
            return EXIT_COMPUTE
        return EXIT_OK

    if not args.input or not args.output:
        raise ValueError("provide --lengths, or --input and --output CSVs")
    samples = read_samples_csv(args.input)
    failures = 0
    with open(args.output, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg",
                         "yaw_deg", "iterations", "residual_mm", "converged"])
        for sample in samples:
            lengths = sample.measured_lengths + args.offset_mm
            result = forward_kinematics(geom, lengths, guess, config)
            writer.writerow([f"{v:.6f}" for v in result.pose.as_vector()]
                            + [result.iterations, f"{result.residual_mm:.6f}",
                               int(result.converged)])
            if not result.converged:
                failures += 1
    _write_manifest(args.output + ".manifest.json", "solve",
                    {"input": args.input, "geometry": args.geometry or "default",
                     "offset_mm": args.offset_mm},
                    [args.output])
    print(f"solved {len(samples)} rows -> {args.output} ({failures} failures)")
    return EXIT_COMPUTE if failures else EXIT_OK


def cmd_calibrate(args) -> int:
    geom = _geometry_arg(args.geometry)
    samples = read_samples_csv(args.input)
    offsets = _parse_offsets(args.offsets) if args.offsets else default_offset_grid()
    sweep = run_sweep(samples, offsets, geom, _solver_config(args))
    write_sweep_csv(args.output, sweep)
    outputs = [args.output]
    if args.plot:
        panel = Panel(title="String length offset sweep",
                      xlabel="offset (mm)", ylabel="|dP| (mm)")
        panel.add("RMS", sweep.offsets_mm, sweep.rms_mm)
        panel.add("max", sweep.offsets_mm, sweep.max_mm)
        write_svg(args.plot, [panel], columns=1, panel_width=460,
                  panel_height=320)
        outputs.append(args.plot)
    _write_manifest(args.output + ".manifest.json", "calibrate",
                    {"input": args.input, "geometry": args.geometry or "default",
                     "offsets": args.offsets or "default"}, outputs)
    print(f"best offset: {sweep.best_offset_mm:.3f} mm "
          f"({sweep.divergent_pairs} divergent pairs)")
    return EXIT_OK


def _write_accuracy_csv(path, report: AccuracyReport) -> None:
    axes = report.axes()
    table = report.error_table()
    rms = report.rms_by_axis()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["displacement"] + axes)
        for d in report.displacements():
            writer.writerow([f"{d:g}"] + [f"{table[a].get(d, float('nan')):.6f}"
                                          for a in axes])
        writer.writerow(["RMS"] + [f"{rms[a]:.6f}" for a in axes])


def _write_points_csv(path, report: AccuracyReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["axis", "displacement", "dp_mm", "iterations",
                         "converged",
                         "solved_x", "solved_y", "solved_z",
                         "solved_roll", "solved_pitch", "solved_yaw"])
        for p in report.points:
            writer.writerow([p.axis, f"{p.displacement:g}",
                             f"{p.translation_error_mm:.6f}", p.iterations,
                             int(p.converged)]
                            + [f"{v:.6f}" for v in p.solved.as_vector()])


def cmd_evaluate(args) -> int:
    scenario = load_scenario(args.scenario)
    os.makedirs(args.output_dir, exist_ok=True)
    rng = scenario.rng() if scenario.model.count_noise_std > 0 else None
    report = run_accuracy_protocol(scenario.geometry, scenario.model,
                                   scenario.script, _solver_config(args),
                                   args.offset_mm, scenario.encoder, rng)
    accuracy_csv = os.path.join(args.output_dir, "accuracy.csv")
    points_csv = os.path.join(args.output_dir, "points.csv")
    accuracy_svg = os.path.join(args.output_dir, "accuracy.svg")
    _write_accuracy_csv(accuracy_csv, report)
    _write_points_csv(points_csv, report)

    table = report.error_table()
    panels = []
    for axis in report.axes():
        xs = sorted(table[axis])
        unit = "mm" if axis in ("x", "y", "z") else "deg"
        panel = Panel(title=f"{axis} displacement", xlabel=f"displacement ({unit})",
                      ylabel="|dP| (mm)")
        panel.add("", xs, [table[axis][x] for x in xs])
        panels.append(panel)
    write_svg(accuracy_svg, panels, columns=3)

    _write_manifest(os.path.join(args.output_dir, "manifest.json"), "evaluate",
                    {"scenario": args.scenario, "offset_mm": args.offset_mm},
                    [accuracy_csv, points_csv, accuracy_svg],
                    seed=scenario.seed)
    failed = report.failed_points()
    rms = report.rms_by_axis()
    print("RMS |dP| per axis: "
          + ", ".join(f"{a}={rms[a]:.3f} mm" for a in report.axes()))
    if failed:
        print(f"{len(failed)} points failed to converge", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_home(args) -> int:
    from .encoder import EncoderChannel, EncoderSpec, home_all

    scenario = load_scenario(args.scenario)
    rng = scenario.rng()
    # homing needs no scripted motion: hold the nominal pose after retracting
    stream = emit_count_stream(scenario.geometry, [Pose.identity()] * 10,
                               scenario.model, scenario.encoder,
                               rate_hz=args.rate_hz, rng=rng)
    channels = [EncoderChannel(spec=EncoderSpec(
        counts_per_mm=scenario.encoder.counts_per_mm,
        range_mm=scenario.encoder.range_mm,
        index_spacing_counts=scenario.encoder.index_spacing_counts,
        first_index_length_mm=float(stream.first_index_lengths_mm[i])))
        for i in range(6)]
    home_all(channels, stream.traces())

    from .kinematics import inverse_kinematics
    truth = inverse_kinematics(scenario.geometry, Pose.identity()) \
        - scenario.model.fixed_shortening_mm
    with open(args.output, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["channel", "first_index_mm", "homed_mm", "truth_mm",
                         "error_mm"])
        for i, ch in enumerate(channels):
            homed = ch.absolute_length()
            writer.writerow([i + 1, f"{stream.first_index_lengths_mm[i]:.6f}",
                             f"{homed:.6f}", f"{truth[i]:.6f}",
                             f"{homed - truth[i]:.6f}"])
    _write_manifest(args.output + ".manifest.json", "home",
                    {"scenario": args.scenario}, [args.output],
                    seed=scenario.seed)
    print(f"all 6 channels homed -> {args.output}")
    return EXIT_OK


def cmd_serve(args) -> int:
    scenario = load_scenario(args.scenario)
    rng = scenario.rng()
    poses = trajectory_from_script(scenario.script, args.rate_hz,
                                   move_s=args.move_s)
    stream = emit_count_stream(scenario.geometry, poses, scenario.model,
                               scenario.encoder, rate_hz=args.rate_hz, rng=rng)
    os.makedirs(args.output_dir, exist_ok=True)
    rig_path = os.path.join(args.output_dir, "rig_config.json")
    write_rig_config(rig_path, scenario, stream.first_index_lengths_mm)
    _write_manifest(os.path.join(args.output_dir, "manifest.json"), "serve",
                    {"scenario": args.scenario, "rate_hz": args.rate_hz,
                     "connect": args.connect}, [rig_path], seed=scenario.seed)
    print(f"serving {len(stream.samples)} packets at {args.rate_hz:g} Hz "
          f"to {args.connect} (rig config: {rig_path})")
    stats = serve(stream, args.connect, bind=_bind_arg(args.bind),
                  rate_hz=args.rate_hz)
    print(f"sent {stats.sent} packets in {stats.duration_s:.2f} s")
    return EXIT_OK


def write_rig_config(path, scenario, first_index_lengths_mm) -> None:
    """Geometry plus per-encoder homing references, as one JSON document."""
    from .geometry import geometry_to_dict

    doc = geometry_to_dict(scenario.geometry)
    doc["encoders"] = [{"first_index_length_mm": float(v)}
                       for v in first_index_lengths_mm]
    doc["encoder_spec"] = {
        "counts_per_mm": scenario.encoder.counts_per_mm,
        "range_mm": scenario.encoder.range_mm,
        "index_spacing_counts": scenario.encoder.index_spacing_counts,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def read_rig_config(path):
    """Returns (geometry, first_index_lengths_mm, EncoderSpec)."""
    from .encoder import EncoderSpec
    from .geometry import geometry_from_dict

    with open(path) as f:
        doc = json.load(f)
    geom = geometry_from_dict(doc)
    if "encoders" not in doc or len(doc["encoders"]) != 6:
        raise ValueError("rig config must carry six entries under 'encoders'")
    first_index = np.array([e["first_index_length_mm"] for e in doc["encoders"]])
    es = doc.get("encoder_spec", {})
    spec = EncoderSpec(counts_per_mm=float(es.get("counts_per_mm", 60.0)),
                       range_mm=float(es.get("range_mm", 200.0)),
                       index_spacing_counts=int(es.get("index_spacing_counts", 4000)))
    return geom, first_index, spec


def _bind_arg(value):
    if value is None:
        return ("127.0.0.1", 0)
    host, _, port = value.rpartition(":")
    return (host, int(port))


def cmd_stream(args) -> int:
    geom, first_index, spec = read_rig_config(args.rig_config)
    chain = load_chain(args.chain) if args.chain else None
    config = ClientConfig(geometry=geom, first_index_lengths_mm=first_index,
                          offset_mm=args.offset_mm, encoder_spec=spec,
                          chain=chain, idle_timeout_s=args.idle_timeout_s)
    client = PoseClient(config, publish_to=args.publish, log_path=args.log)
    stats = client.run(args.bind)
    _write_manifest(args.log + ".manifest.json", "stream",
                    {"rig_config": args.rig_config, "offset_mm": args.offset_mm,
                     "chain": args.chain, "bind": args.bind}, [args.log])
    print(f"processed {stats.processed}/{stats.received} packets, "
          f"{stats.gap_count} gaps, {stats.duplicate_count} duplicates, "
          f"{stats.solve_failures} solve failures")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strenc",
        description="String-encoder pose toolkit: solve, calibrate, evaluate, "
                    "home, serve, stream.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p):
        p.add_argument("--tolerance-mm", type=float, default=0.01,
                       help="string-length residual tolerance (default 0.01)")
        p.add_argument("--max-iterations", type=int, default=50)

    p = sub.add_parser("solve", help="solve string lengths for a pose")
    p.add_argument("--geometry", help="geometry JSON (default: packaged rig)")
    p.add_argument("--offset-mm", type=float, default=0.0,
                   help="string-length correction added to every leg")
    p.add_argument("--lengths", help="six lengths in mm, comma separated")
    p.add_argument("--input", help="samples CSV (columns L1..L6,x,y,z,roll,pitch,yaw)")
    p.add_argument("--output", help="pose CSV to write in batch mode")
    p.add_argument("--guess", help="initial pose guess, six values")
    add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("calibrate", help="sweep string-length offsets")
    p.add_argument("--input", required=True, help="samples CSV")
    p.add_argument("--geometry")
    p.add_argument("--offsets", help="grid as start:stop:step or comma list "
                                     "(default -2:6:0.5)")
    p.add_argument("--output", required=True, help="sweep CSV")
    p.add_argument("--plot", help="optional SVG plot path")
    add_solver_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="run the simulated accuracy protocol")
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--offset-mm", type=float, default=3.0)
    p.add_argument("--output-dir", required=True)
    add_solver_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("home", help="simulated homing run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rate-hz", type=float, default=1000.0)
    p.add_argument("--output", required=True, help="homing report CSV")
    p.set_defaults(func=cmd_home)

    p = sub.add_parser("serve", help="stream simulated count packets over UDP")
    p.add_argument("--scenario", required=True)
    p.add_argument("--connect", required=True, help="destination host:port")
    p.add_argument("--bind", help="local host:port to send from")
    p.add_argument("--rate-hz", type=float, default=1000.0)
    p.add_argument("--move-s", type=float, default=0.2,
                   help="ramp time between scripted points")
    p.add_argument("--output-dir", required=True,
                   help="where to write the rig config and manifest")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stream", help="receive counts, solve and log poses")
    p.add_argument("--bind", required=True, help="listen host:port")
    p.add_argument("--rig-config", required=True,
                   help="geometry + homing references JSON written by serve")
    p.add_argument("--offset-mm", type=float, default=3.0)
    p.add_argument("--chain", help="frame-chain JSON from registration")
    p.add_argument("--log", required=True, help="pose CSV to write")
    p.add_argument("--publish", help="optional host:port for pose packets")
    p.add_argument("--idle-timeout-s", type=float, default=1.0)
    p.set_defaults(func=cmd_stream)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StrencError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
