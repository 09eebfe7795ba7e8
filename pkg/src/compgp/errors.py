"""Exception types raised across the package."""


class CompGPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CompGPError, ValueError):
    """Non-finite inputs, shape mismatches, out-of-range options."""


class DegenerateDesignError(CompGPError, ValueError):
    """Design has duplicated points or too few points."""


class SingularMatrixError(CompGPError, ArithmeticError):
    """Factorization failed for every step of the jitter ladder.

    ``diagnostics`` carries the mean diagonal, the smallest diagonal entry
    and the jitter steps that were attempted.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class IllPosedBasisError(CompGPError, ValueError):
    """Regression basis matrix is rank deficient."""


class EstimationFailedError(CompGPError, RuntimeError):
    """Likelihood optimization did not produce a usable fit."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ArchiveError(CompGPError, ValueError):
    """Malformed, corrupt or version-incompatible model archive."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class DataParseError(CompGPError, ValueError):
    """CSV input could not be turned into a dataset."""
