"""Exception hierarchy shared by all modules."""


class NomaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NomaError, ValueError):
    """Invalid scenario, solver or training configuration."""


class InfeasibleError(NomaError):
    """An oracle could not produce an allocation satisfying its hard constraints."""


class UndefinedLoadError(InfeasibleError):
    """Capacity was requested at a base station with no associated users."""


class InfeasibleAssociationError(InfeasibleError):
    """Some user has no finite association score at any base station."""


class CapacityError(InfeasibleError):
    """A base station has more users than its subchannels can host (2 per subchannel)."""


class FormatError(NomaError, IOError):
    """Base class for binary file format problems."""


class VersionMismatchError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class TruncatedFileError(ChecksumError):
    """File ended before the length announced by its header."""
