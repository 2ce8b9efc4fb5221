"""Exception types shared across the package."""


class RespellError(Exception):
    """Base class for all errors raised by this package."""


class CharsetError(RespellError):
    """A symbol is not part of the supported character set."""


class MissingGlyphError(RespellError):
    """A font does not provide a glyph for a requested character."""


class DimensionError(RespellError):
    """Array shapes do not agree with what an operation requires."""


class LayoutError(RespellError):
    """Requested text cannot be placed inside the available region."""


class NumericError(RespellError):
    """A computation produced non-finite values."""


class CheckpointError(RespellError):
    """A checkpoint is corrupt, incompatible, or from another config."""


class ConfigError(RespellError):
    """A configuration file or override is malformed or unknown."""
