"""Exception hierarchy shared by all sgcrm modules."""


class SgcrmError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SgcrmError):
    """An argument lies outside the mathematical domain of the operation."""


class NumericalError(SgcrmError):
    """A numerical kernel produced an invalid result (bad matrix, bad derivative)."""


class DegenerateRegionError(NumericalError):
    """A truncation region has (numerically) zero probability mass."""


class LengthMismatchError(SgcrmError):
    """Paired vectors have different lengths."""


class InsufficientSampleError(SgcrmError):
    """Too few observations for the requested statistic."""


class KindMismatchError(SgcrmError):
    """Cutoff shapes are inconsistent with the declared pair kind."""


class NonConvergenceError(NumericalError):
    """An iterative procedure failed to converge within its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateColumnError(SgcrmError):
    """A column's empirical distribution makes a latent threshold infinite."""

    def __init__(self, column, message):
        super().__init__(f"column {column!r}: {message}")
        self.column = column


class SingularityError(NumericalError):
    """A matrix that must be positive definite failed factorization."""


class AllMissingError(SgcrmError):
    """A row offered for imputation has no observed cells."""


class RetryExhaustedError(SgcrmError):
    """A rejection-sampling loop exceeded its retry budget."""


class SchemaMismatchError(SgcrmError):
    """CSV header does not match the declared schema."""


class ParseError(SgcrmError):
    """A cell could not be parsed as a number."""

    def __init__(self, row, col, message):
        super().__init__(f"row {row}, column {col!r}: {message}")
        self.row = row
        self.col = col


class ValidationError(SgcrmError):
    """A parsed value violates a column-type rule."""

    def __init__(self, rule, message):
        super().__init__(message)
        self.rule = rule


class IoError(SgcrmError):
    """Reading or writing a report failed."""
