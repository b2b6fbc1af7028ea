"""Exception hierarchy shared across the package."""


class DisplaceError(Exception):
    """Base class for all errors raised by :mod:`displace`."""


class MalformedInputError(DisplaceError, ValueError):
    """A line of an input file could not be parsed or validated."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnknownIdError(DisplaceError, KeyError):
    """An edge refers to a paper id that is not in the corpus (strict mode)."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown id"


class IncompatibleSnapshotError(DisplaceError):
    """Snapshot magic bytes or format version do not match."""


class SnapshotIntegrityError(DisplaceError):
    """Snapshot is truncated or its checksum does not match."""


class IneligibleFocalError(DisplaceError, ValueError):
    """Focal paper has no references or no eligible citers."""


class UndefinedMetricError(DisplaceError, ZeroDivisionError):
    """A metric's denominator is zero."""


class FitError(DisplaceError, ValueError):
    """A fit's preconditions are not met or the data do not identify it."""


class LogprobsUnavailableError(DisplaceError):
    """The endpoint answered without token log-probabilities."""


class TransportError(DisplaceError):
    """The endpoint could not be reached after all retries."""


class JournalCorruptError(DisplaceError):
    """A progress journal cannot be trusted for resuming."""


class DivergentTailError(DisplaceError, ValueError):
    """Rank-curve exponent too small for the concentration ratio to exist (a <= 1)."""


class UnparseableResponseError(DisplaceError):
    """The endpoint's reply has no usable option token or is not valid JSON."""
