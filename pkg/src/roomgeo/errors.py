"""Exception types shared across the toolkit.

Every error raised on a contract violation derives from :class:`RoomGeoError`
so callers (notably the command line front end) can catch one base class and
report a machine-readable failure.
"""


class RoomGeoError(Exception):
    """Base class for all toolkit errors."""


class DegenerateImage(RoomGeoError):
    """Microphone and image microphone are too close to define a wall."""

    def __init__(self, message: str, wall: str | None = None):
        super().__init__(message)
        self.wall = wall


class InvalidRadii(RoomGeoError):
    """Echo radius is smaller than the direct-path radius."""


class MicOutsideRoom(RoomGeoError):
    """Microphone position violates a wall half-space."""


class SourceOutsideRoom(RoomGeoError):
    """Source position violates a wall half-space."""


class SamplingExhausted(RoomGeoError):
    """Rejection sampling hit its attempt cap without a valid draw."""


class GridMismatch(RoomGeoError):
    """Input sample rate or geometry disagrees with the map grid."""


class MissingDirectPath(RoomGeoError):
    """No peak consistent with a direct path was found."""


class MissingWallPeak(RoomGeoError):
    """A wall's prior region contains no usable peak."""

    def __init__(self, message: str, wall: str | None = None):
        super().__init__(message)
        self.wall = wall


class SampleNotFound(RoomGeoError):
    """Requested sample id is not present in the manifest."""


class CorruptRecord(RoomGeoError):
    """Stored record bytes fail their checksum or header checks."""


class NonUnitNormal(RoomGeoError):
    """A wall normal deviates from unit length beyond tolerance."""


class EmptyInput(RoomGeoError):
    """An aggregate was requested over zero items."""


class InvalidFileFormat(RoomGeoError):
    """A binary container or JSON document does not match its format."""
