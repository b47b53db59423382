"""Exception types shared across the package."""


class GcnCertError(Exception):
    """Base class for all errors raised by this package."""


class DataError(GcnCertError):
    """Invalid input data: malformed files, broken invariants, bad indices."""


class DimensionError(DataError):
    """Matrix shapes do not chain."""


class OracleInfeasibleError(GcnCertError):
    """Exhaustive enumeration would exceed the configured candidate cap."""
