"""Exception types shared across the package."""


class CCoTError(Exception):
    """Base class for all package errors."""


class ScenarioParseError(CCoTError, ValueError):
    """A scenario source could not be decoded.

    ``locus`` names where the problem sits: a line number for undecodable
    text, or a dotted field path such as ``tracks[0].samples[3].t``.
    """

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class StructuralError(CCoTError, ValueError):
    """Inputs are individually valid but do not fit together."""


class TimeRangeError(CCoTError, ValueError):
    """A query time lies outside the span covered by the data."""


class InsufficientHistoryError(CCoTError, ValueError):
    """The ego track has a gap too large to interpolate across."""


class ConfigError(CCoTError, ValueError):
    """Configuration values violate their invariants."""


class ScoringError(CCoTError, ValueError):
    """A sample cannot be scored (e.g. trajectories share no offsets)."""


class RemoteModelError(CCoTError):
    """Base class for failures talking to a remote model endpoint."""


class RemoteTimeoutError(RemoteModelError):
    pass


class RemoteTransportError(RemoteModelError):
    pass


class RemoteStatusError(RemoteModelError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
