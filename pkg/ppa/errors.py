"""Exception hierarchy for the numerical core.

Checked properties that fail are reported as data; these exceptions are
reserved for inputs that cannot be processed at all.
"""


class PPAError(Exception):
    """Base class for every error raised by the ``ppa`` package."""


class DimensionMismatchError(PPAError, ValueError):
    """Two points (or a point and an operator) live in different spaces."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class InvalidParameterError(PPAError, ValueError):
    """A scalar or structural parameter is outside its admissible range."""


class IllPosedConfigError(PPAError, ArithmeticError):
    """An iteration produced a non-finite value."""


class UnknownCatalogNameError(PPAError, KeyError):
    """A schedule, operator or statement name is not in its catalog."""

    def __init__(self, catalog: str, name: str):
        super().__init__(f"unknown {catalog} name: {name!r}")
        self.catalog = catalog
        self.name = name


class BudgetExceededError(PPAError):
    """A bound evaluation ran out of steps or bits.

    Attributes:
        partial: Proven lower bound on the value that was being computed.
        term: Name of the sub-term during which the budget ran out.
    """

    def __init__(self, partial: int, term: str):
        super().__init__(f"budget exceeded in {term}, bound >= {partial}")
        self.partial = partial
        self.term = term


class ConfigError(PPAError):
    """A scenario config failed validation.

    Attributes:
        diagnostics: List of ``{"path": ..., "message": ...}`` dicts, one per
            offending field.
    """

    def __init__(self, diagnostics: list):
        lines = "; ".join(f"{d['path']}: {d['message']}" for d in diagnostics)
        super().__init__(f"invalid config: {lines}")
        self.diagnostics = diagnostics
