"""Exception types shared across the package (the CLI maps them to exit codes)."""


class HociError(Exception):
    pass


class OrderError(HociError, ValueError):
    """Requested expansion order is outside what the tabulated coefficients support."""


class DomainError(HociError, ValueError):
    """A parameter or model precondition is violated."""


class RangeError(HociError, ValueError):
    """A statistic (or its corrected transform) left the range of the mean map."""
