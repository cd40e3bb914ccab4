"""Exception types raised by twistframe."""


class TwistFrameError(Exception):
    """Base class for all library errors."""


class TruncationError(TwistFrameError):
    """A generator does not fit in the truncation box."""


class GridMismatch(TwistFrameError):
    """Two objects live on different grids."""


class ShiftOutOfBox(TwistFrameError):
    """A lattice shift moves non-negligible mass outside the box."""


class ZeroFunction(TwistFrameError):
    """An operation needs a nonzero function."""


class NotAFrame(TwistFrameError):
    pass


class MembershipFailure(TwistFrameError):
    """A function is not in the twisted shift-invariant space."""


class NotTSP(TwistFrameError):
    """An operator fails the twisted shift-preserving check."""


class BasisNotParseval(TwistFrameError):
    pass


class NotSelfAdjoint(TwistFrameError):
    pass


class ConfigError(TwistFrameError):
    """Invalid CLI configuration."""
