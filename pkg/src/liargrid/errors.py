"""Exception types shared across the package.

Every error raised on a user-facing path derives from ``LiarError`` so
callers (and the command line front end) can map failures to a small set
of categories: configuration mistakes, malformed input files, numerical
trouble, and size guards.
"""


class LiarError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LiarError):
    """A parameter combination that can never be valid (bad shape, rank,
    radius, horizon, or a missing required option)."""


class GtsFormatError(LiarError):
    """Malformed grid time series file.

    Parameters
    ----------
    message : str
        Description of what was wrong.
    offset : int
        Byte offset into the file at which the problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnderdeterminedError(LiarError):
    """A least-squares block with fewer usable rows than unknowns."""


class StabilityError(LiarError):
    """Kernel field rejected because its stability certificate fails."""


class NumericalError(LiarError):
    """An iterative numerical routine failed to converge."""


class StructureError(LiarError):
    """Input lacks structure an operation requires (for example a
    non-box neighborhood passed to the separable assembler)."""


class SizeError(LiarError):
    """A request that would materialize an array above a hard cap."""
