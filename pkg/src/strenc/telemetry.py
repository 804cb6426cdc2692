"""UDP acquisition link: count-packet daemon and the pose-solving client.

The daemon paces the simulated per-channel count stream onto the wire the
way the acquisition hardware would; the client homes its channels from the
index flags, applies the string-length offset, solves poses seeded from the
previous solution, and republishes/logs the results. UDP is used as-is:
lost measurements are perishable, so reliability is bookkeeping (sequence
gaps), not retransmission.
"""

from __future__ import annotations

import csv
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (BindFailure, GimbalLock, PacketError, SingularConfiguration)
from .encoder import EncoderChannel, EncoderSpec
from .geometry import PlatformGeometry, Pose, pose_to_matrix
from .kinematics import SolverConfig, forward_kinematics
from .registration import FrameChain, encoder_pose_in_robot_frame
from .simulator import CountStream

PROTOCOL_VERSION = 1

COUNT_MAGIC = b"SENC"
POSE_MAGIC = b"SPOS"

# magic, version, flags, sequence, timestamp_us, six raw counts
_COUNT_STRUCT = struct.Struct("<4sBBIQ6i")
COUNT_PACKET_SIZE = _COUNT_STRUCT.size

# magic, version, sequence, status, iterations, gap_count, pose, residual
_POSE_STRUCT = struct.Struct("<4sBIBBI6dd")
POSE_PACKET_SIZE = _POSE_STRUCT.size

STATUS_NOT_HOMED = 0
STATUS_CONVERGED = 1
STATUS_SOLVE_FAILED = 2

_FLAGS_RESERVED_MASK = 0xC0


@dataclass(frozen=True)
class CountPacket:
    """One acquisition sample on the wire."""

    sequence: int
    timestamp_us: int
    counts: tuple            # six signed raw counts
    index_flags: tuple       # six bools, pulse seen since previous packet

    def encode(self) -> bytes:
        flags = 0
        for i, seen in enumerate(self.index_flags):
            if seen:
                flags |= 1 << i
        return _COUNT_STRUCT.pack(COUNT_MAGIC, PROTOCOL_VERSION, flags,
                                  self.sequence, self.timestamp_us, *self.counts)

    @staticmethod
    def decode(data: bytes) -> "CountPacket":
        if len(data) != COUNT_PACKET_SIZE:
            raise PacketError(f"count packet must be {COUNT_PACKET_SIZE} bytes, "
                              f"got {len(data)}")
        magic, version, flags, seq, ts, *counts = _COUNT_STRUCT.unpack(data)
        if magic != COUNT_MAGIC:
            raise PacketError(f"bad magic {magic!r}")
        if version != PROTOCOL_VERSION:
            raise PacketError(f"unsupported version {version}")
        if flags & _FLAGS_RESERVED_MASK:
            raise PacketError("reserved flag bits set")
        return CountPacket(sequence=seq, timestamp_us=ts, counts=tuple(counts),
                           index_flags=tuple(bool(flags & (1 << i))
                                             for i in range(6)))


@dataclass(frozen=True)
class PosePacket:
    """Solved pose (or solve status) echoing the triggering count packet."""

    sequence: int
    status: int              # STATUS_* above
    iterations: int
    gap_count: int           # cumulative missing sequences seen by the client
    pose: tuple              # x, y, z (mm), roll, pitch, yaw (deg)
    residual_mm: float

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def encode(self) -> bytes:
        return _POSE_STRUCT.pack(POSE_MAGIC, PROTOCOL_VERSION, self.sequence,
                                 self.status, self.iterations, self.gap_count,
                                 *self.pose, self.residual_mm)

    @staticmethod
    def decode(data: bytes) -> "PosePacket":
        if len(data) != POSE_PACKET_SIZE:
            raise PacketError(f"pose packet must be {POSE_PACKET_SIZE} bytes, "
                              f"got {len(data)}")
        magic, version, seq, status, iters, gaps, *rest = _POSE_STRUCT.unpack(data)
        if magic != POSE_MAGIC:
            raise PacketError(f"bad magic {magic!r}")
        if version != PROTOCOL_VERSION:
            raise PacketError(f"unsupported version {version}")
        return PosePacket(sequence=seq, status=status, iterations=iters,
                          gap_count=gaps, pose=tuple(rest[:6]),
                          residual_mm=rest[6])


def _parse_endpoint(endpoint: str) -> tuple:
    host, _, port = endpoint.rpartition(":")
    if not host:
        raise ValueError(f"endpoint {endpoint!r} must be host:port")
    return host, int(port)


def _bound_socket(bind) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(bind)
    except OSError as exc:
        sock.close()
        raise BindFailure(f"cannot bind {bind}: {exc}") from exc
    return sock


@dataclass
class ServeStats:
    sent: int = 0
    dropped_for_test: int = 0
    duration_s: float = 0.0


def serve(stream: CountStream, destination, *, bind=("127.0.0.1", 0),
          rate_hz: float | None = None, drop_sequences=frozenset(),
          stop_event: threading.Event | None = None) -> ServeStats:
    """Pace the stream's samples to `destination` as CountPackets.

    Sequence numbers increment by one per generated sample; sequences listed
    in drop_sequences are generated but withheld (for loss-injection tests).
    Runs until the stream is exhausted or stop_event is set.
    """
    if isinstance(destination, str):
        destination = _parse_endpoint(destination)
    if not 1.0 <= (rate_hz or stream.rate_hz) <= 2000.0:
        raise ValueError("rate must be within 1..2000 Hz")
    rate = rate_hz or stream.rate_hz
    period = 1.0 / rate
    drop_sequences = frozenset(drop_sequences)

    sock = _bound_socket(bind)
    stats = ServeStats()
    start = time.perf_counter()
    try:
        for seq, sample in enumerate(stream.samples):
            if stop_event is not None and stop_event.is_set():
                break
            target = start + seq * period
            delay = target - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            packet = CountPacket(sequence=seq, timestamp_us=sample.timestamp_us,
                                 counts=tuple(int(c) for c in sample.counts),
                                 index_flags=tuple(bool(b)
                                                   for b in sample.index_flags))
            if seq in drop_sequences:
                stats.dropped_for_test += 1
                continue
            sock.sendto(packet.encode(), destination)
            stats.sent += 1
    finally:
        stats.duration_s = time.perf_counter() - start
        sock.close()
    return stats


@dataclass
class ClientStats:
    received: int = 0
    processed: int = 0
    gap_count: int = 0          # sequences skipped over (lost packets)
    duplicate_count: int = 0    # duplicates / out-of-order arrivals dropped
    decode_errors: int = 0
    solves: int = 0
    solve_failures: int = 0
    max_queue_depth: int = 0


LOG_COLUMNS = ["sequence", "timestamp_us", "status", "iterations", "residual_mm",
               "x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg",
               "gap_count"]


@dataclass
class ClientConfig:
    """Everything the pose client needs besides the socket."""

    geometry: PlatformGeometry
    first_index_lengths_mm: np.ndarray
    offset_mm: float = 0.0
    encoder_spec: EncoderSpec = field(default_factory=EncoderSpec)
    chain: FrameChain | None = None
    # short leash: streaming seeds from the previous pose, so converged solves
    # need a few iterations and hopeless ones should fail fast
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(max_iterations=12))
    idle_timeout_s: float = 1.0


class PoseClient:
    """Orders count packets by sequence, homes, solves, logs, republishes.

    Two stages: a receive thread drains the socket into a queue; the solve
    loop consumes it in sequence order. Late or duplicate sequences are
    dropped (with a counter); skipped-over sequences add to the gap counter.
    """

    def __init__(self, config: ClientConfig, *, publish_to=None,
                 log_path=None):
        self.config = config
        self.publish_to = (_parse_endpoint(publish_to)
                           if isinstance(publish_to, str) else publish_to)
        self.log_path = log_path
        self.stats = ClientStats()
        self.pose_packets: list[PosePacket] = []
        self.channels = [
            EncoderChannel(spec=EncoderSpec(
                counts_per_mm=config.encoder_spec.counts_per_mm,
                range_mm=config.encoder_spec.range_mm,
                index_spacing_counts=config.encoder_spec.index_spacing_counts,
                first_index_length_mm=float(config.first_index_lengths_mm[i])))
            for i in range(6)
        ]
        self._last_counts = None
        self._expected_seq = None
        self._seed_pose = Pose.identity()

    def run(self, listen, *, stop_event: threading.Event | None = None,
            keep_packets: bool = False) -> ClientStats:
        """Consume the stream until idle for idle_timeout_s (or stop_event)."""
        if isinstance(listen, str):
            listen = _parse_endpoint(listen)
        sock = _bound_socket(listen)
        # keep bursts while the solver catches up
        try:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 22)
        except OSError:
            pass
        sock.settimeout(0.05)

        queue: deque = deque()
        done = threading.Event()

        def rx_loop():
            idle_since = time.perf_counter()
            while not done.is_set():
                if stop_event is not None and stop_event.is_set():
                    break
                try:
                    data, _ = sock.recvfrom(2048)
                except socket.timeout:
                    if time.perf_counter() - idle_since > self.config.idle_timeout_s:
                        break
                    continue
                idle_since = time.perf_counter()
                queue.append(data)
                depth = len(queue)
                if depth > self.stats.max_queue_depth:
                    self.stats.max_queue_depth = depth

        rx = threading.Thread(target=rx_loop, name="strenc-rx", daemon=True)
        publish_sock = None
        if self.publish_to is not None:
            publish_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

        log_file = open(self.log_path, "w", newline="") if self.log_path else None
        log_writer = None
        if log_file is not None:
            log_writer = csv.writer(log_file)
            log_writer.writerow(LOG_COLUMNS)

        rx.start()
        try:
            while True:
                if not queue:
                    if not rx.is_alive():
                        break
                    time.sleep(0.0005)
                    continue
                data = queue.popleft()
                self.stats.received += 1
                try:
                    packet = CountPacket.decode(data)
                except PacketError:
                    self.stats.decode_errors += 1
                    continue
                pose_packet = self._process(packet)
                if pose_packet is None:
                    continue
                if keep_packets:
                    self.pose_packets.append(pose_packet)
                if publish_sock is not None:
                    publish_sock.sendto(pose_packet.encode(), self.publish_to)
                if log_writer is not None:
                    self._log_row(log_writer, packet, pose_packet)
        finally:
            done.set()
            rx.join(timeout=2.0)
            sock.close()
            if publish_sock is not None:
                publish_sock.close()
            if log_file is not None:
                log_file.close()
        return self.stats

    def _process(self, packet: CountPacket) -> PosePacket | None:
        """Sequence bookkeeping, channel updates, and the per-packet solve."""
        if self._expected_seq is None:
            self._expected_seq = packet.sequence
        if packet.sequence < self._expected_seq:
            self.stats.duplicate_count += 1
            return None
        if packet.sequence > self._expected_seq:
            self.stats.gap_count += packet.sequence - self._expected_seq
        self._expected_seq = packet.sequence + 1
        self.stats.processed += 1

        counts = np.asarray(packet.counts, dtype=np.int64)
        if self._last_counts is None:
            deltas = np.zeros(6, dtype=np.int64)
        else:
            deltas = counts - self._last_counts
        self._last_counts = counts
        for i, channel in enumerate(self.channels):
            channel.feed(int(deltas[i]), bool(packet.index_flags[i]))

        if not all(ch.index_latched for ch in self.channels):
            return PosePacket(sequence=packet.sequence, status=STATUS_NOT_HOMED,
                              iterations=0, gap_count=self.stats.gap_count,
                              pose=(0.0,) * 6, residual_mm=0.0)

        lengths = np.array([ch.absolute_length() for ch in self.channels])
        adjusted = lengths + self.config.offset_mm
        self.stats.solves += 1
        try:
            result = forward_kinematics(self.config.geometry, adjusted,
                                        self._seed_pose, self.config.solver)
        except SingularConfiguration:
            result = None
        if result is None or not result.converged:
            self.stats.solve_failures += 1
            self._seed_pose = Pose.identity()  # retry next packet from nominal
            iterations = result.iterations if result is not None else 0
            residual = result.residual_mm if result is not None else float("nan")
            return PosePacket(sequence=packet.sequence, status=STATUS_SOLVE_FAILED,
                              iterations=iterations,
                              gap_count=self.stats.gap_count,
                              pose=(0.0,) * 6, residual_mm=residual)

        self._seed_pose = result.pose
        out_pose = result.pose
        if self.config.chain is not None:
            try:
                out_pose = encoder_pose_in_robot_frame(
                    self.config.chain, pose_to_matrix(result.pose))
            except GimbalLock:
                self.stats.solve_failures += 1
                return PosePacket(sequence=packet.sequence,
                                  status=STATUS_SOLVE_FAILED,
                                  iterations=result.iterations,
                                  gap_count=self.stats.gap_count,
                                  pose=(0.0,) * 6, residual_mm=result.residual_mm)
        return PosePacket(sequence=packet.sequence, status=STATUS_CONVERGED,
                          iterations=result.iterations,
                          gap_count=self.stats.gap_count,
                          pose=tuple(out_pose.as_vector()),
                          residual_mm=result.residual_mm)

    @staticmethod
    def _log_row(writer, packet: CountPacket, pose_packet: PosePacket) -> None:
        writer.writerow([
            pose_packet.sequence, packet.timestamp_us, pose_packet.status,
            pose_packet.iterations, f"{pose_packet.residual_mm:.6f}",
            *(f"{v:.6f}" for v in pose_packet.pose),
            pose_packet.gap_count,
        ])


def client_pipeline(listen, config: ClientConfig, *, publish_to=None,
                    log_path=None, stop_event=None,
                    keep_packets: bool = False) -> tuple:
    """Run a PoseClient to completion; returns (client, stats)."""
    client = PoseClient(config, publish_to=publish_to, log_path=log_path)
    stats = client.run(listen, stop_event=stop_event, keep_packets=keep_packets)
    return client, stats
