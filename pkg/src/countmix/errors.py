"""Exception types shared across the package."""


class CountmixError(Exception):
    """Base class for every error this package raises on purpose."""


class SchemaError(CountmixError):
    """A named column is missing or the header is malformed."""


class ParseError(CountmixError):
    """A cell failed to parse; carries the 1-based data-row index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class EmptyDataError(CountmixError):
    """The input contains no observations."""


class DimensionError(CountmixError):
    """Shapes or lengths of inputs do not agree."""


class DomainError(CountmixError):
    """A value lies outside its mathematically valid domain."""


class NumericOverflowError(CountmixError):
    """A non-finite intermediate appeared; carries the offending row."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class SingularDesignError(CountmixError):
    """The (weighted) design matrix is rank deficient; names the columns."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        super().__init__(message)
        self.columns = columns


class ComponentCollapseError(CountmixError):
    """A mixture component lost too much mass to be refit."""


class InformationMatrixError(CountmixError):
    """The observed information matrix could not be evaluated."""


class NoScoreError(CountmixError):
    """The requested criterion is unavailable in every row."""


class SweepError(CountmixError):
    """Every component count in a sweep failed; carries per-G messages."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SimulationSpecError(CountmixError):
    """A simulation specification would produce unusable data."""
