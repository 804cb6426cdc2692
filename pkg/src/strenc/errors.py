"""Exception types shared across the toolkit."""


class StrencError(Exception):
    """Base class for all toolkit errors."""


class GimbalLock(StrencError):
    """Euler extraction attempted at (or within tolerance of) pitch = +/-90 deg."""


class DegenerateLeg(StrencError):
    """A computed leg length is effectively zero (attachment points coincide)."""


class SingularConfiguration(StrencError):
    """Inverse Jacobian condition number exceeds the solvable limit."""


class NoConvergence(StrencError):
    """Iterative pose solve hit its iteration limit above tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotHomed(StrencError):
    """Absolute length queried on a channel whose index pulse was never latched."""


class HomingIncomplete(StrencError):
    """One or more channels saw no index event during homing."""

    def __init__(self, channels):
        self.channels = list(channels)
        super().__init__(f"no index event on channel(s) {self.channels}")


class NonPositiveLength(StrencError):
    """A string-length offset drove a leg length to zero or below."""


class SweepFailed(StrencError):
    """Too many (sample, offset) pairs diverged during a calibration sweep."""


class OutOfRange(StrencError):
    """A simulated string length left the encoder's measurable range."""


class BindFailure(StrencError):
    """The telemetry daemon could not bind its socket."""


class PacketError(StrencError):
    """A telemetry packet failed to decode (size, magic, or version)."""
