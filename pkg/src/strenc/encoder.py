"""Incremental string-encoder model: counts, index-pulse latching, homing.

The encoders deliver relative quadrature counts plus an index pulse three
times across their travel. Absolute length becomes available only after the
first index pulse has been latched and referenced against the recorded
length of that pulse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import HomingIncomplete, NotHomed


@dataclass(frozen=True)
class EncoderSpec:
    """Static per-encoder parameters."""

    counts_per_mm: float = 60.0
    range_mm: float = 200.0
    index_spacing_counts: int = 4000
    first_index_length_mm: float = 0.0  # recorded before installation

    def __post_init__(self):
        if self.counts_per_mm <= 0 or self.range_mm <= 0:
            raise ValueError("counts_per_mm and range_mm must be > 0")
        if self.index_spacing_counts <= 0:
            raise ValueError("index_spacing_counts must be > 0")
        full_range = self.counts_per_mm * self.range_mm
        if 3 * self.index_spacing_counts > full_range + self.index_spacing_counts:
            raise ValueError("three index pulses do not fit in the travel range")

    @property
    def full_range_counts(self) -> float:
        return self.counts_per_mm * self.range_mm


def counts_to_mm(spec: EncoderSpec, counts) -> float:
    """Convert a signed count (or count delta) to mm."""
    return counts / spec.counts_per_mm


@dataclass
class EncoderChannel:
    """Count state of one encoder channel.

    Single-writer: feed() is the only mutator. The index latch is sticky;
    only reset() clears it.
    """

    spec: EncoderSpec = field(default_factory=EncoderSpec)
    raw_count: int = 0
    index_latched: bool = False
    index_count: int = 0

    def feed(self, delta: int, index_seen: bool = False) -> "EncoderChannel":
        """Advance the count; latch the first index pulse, ignore later ones."""
        self.raw_count += int(delta)
        if index_seen and not self.index_latched:
            self.index_count = self.raw_count
            self.index_latched = True
        return self

    def absolute_length(self) -> float:
        """Absolute string length in mm; requires a latched index pulse."""
        if not self.index_latched:
            raise NotHomed("index pulse not latched; run the homing procedure")
        return self.spec.first_index_length_mm + counts_to_mm(
            self.spec, self.raw_count - self.index_count)

    def reset(self) -> None:
        self.raw_count = 0
        self.index_count = 0
        self.index_latched = False


def feed_counts(channel: EncoderChannel, delta: int,
                index_seen: bool = False) -> EncoderChannel:
    """Module-level alias for EncoderChannel.feed."""
    return channel.feed(delta, index_seen)


def absolute_length(channel: EncoderChannel) -> float:
    """Module-level alias for EncoderChannel.absolute_length."""
    return channel.absolute_length()


def home_all(channels, retract_traces) -> list[EncoderChannel]:
    """Feed each channel its retraction trace and require every latch to set.

    retract_traces is one iterable of (delta, index_seen) events per channel.
    Raises HomingIncomplete naming the (zero-based) channels whose trace
    carried no index event.
    """
    channels = list(channels)
    if len(retract_traces) != len(channels):
        raise ValueError("one trace per channel required")
    for channel, trace in zip(channels, retract_traces):
        for delta, index_seen in trace:
            channel.feed(delta, index_seen)
    missing = [i for i, ch in enumerate(channels) if not ch.index_latched]
    if missing:
        raise HomingIncomplete(missing)
    return channels
