"""Exception types raised across the toolkit."""


class DrfError(Exception):
    """Base class for every error raised by drfkit."""


class FormatError(DrfError, ValueError):
    """A file header or record does not match its declared format."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SizeError(DrfError, ValueError):
    """A payload length disagrees with the dimensions in its header."""


class ShapeError(DrfError, ValueError):
    """Array shapes or channel counts are inconsistent."""


class RegionError(DrfError, ValueError):
    """A feature region (mask) is empty or produced no usable statistics."""


class WeightError(DrfError, ValueError):
    """Network weights do not match the layer specification."""


class TrainingError(DrfError, ValueError):
    """A classifier cannot be trained on the supplied labels."""


class JoinError(DrfError, ValueError):
    """Feature table and cohort manifest disagree on patient ids."""

    def __init__(self, message, orphans=()):
        super().__init__(message)
        self.orphans = tuple(orphans)
