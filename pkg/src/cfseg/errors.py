"""Exception types shared across the package."""


class CfsegError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(CfsegError):
    """Image and segment map (or weight raster) dimensions disagree."""


class NonContiguousLabels(CfsegError):
    """A segment id in [0, segment_count) is assigned to no pixel."""

    def __init__(self, missing_id: int):
        self.missing_id = int(missing_id)
        super().__init__(f"segment id {self.missing_id} is assigned to no pixel")


class SegmentIdOutOfRange(CfsegError):
    """A requested segment id is not in [0, segment_count)."""


class TargetEqualsPredicted(CfsegError):
    """Targeted search asked to reach the class the image already has."""


class EmptyFrontier(CfsegError):
    """pop on a frontier with no entries."""


class BackendUnavailable(CfsegError):
    """External scoring process could not be started or died."""


class MalformedResponse(CfsegError):
    """External scoring process sent something outside the protocol."""


class ScoreTimeout(CfsegError):
    """External scoring process did not answer within the deadline."""
