"""Exception types shared across the package.

The CLI maps these onto exit codes: bad arguments (2), missing inputs (3),
numerical failures (4).
"""


class FormatError(ValueError):
    """A binary grid/sequence file has a bad magic, version, or layout."""


class DegenerateFieldError(ValueError):
    """An operation received a field it cannot meaningfully process
    (constant grid to normalize, fully unburnable ignition zone, ...)."""


class MissingInputError(FileNotFoundError):
    """A command requires an artifact that has not been produced yet."""


class NumericalError(RuntimeError):
    """Training or evaluation produced non-finite values."""
