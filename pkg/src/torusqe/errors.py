"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class BudgetError(RuntimeError):
    """A computation would exceed its configured resource budget."""


class ToleranceError(RuntimeError):
    """A requested accuracy cannot be met with the given truncation."""


class EmptyWindowError(ValueError):
    """A spectral window contains no eigenvalues."""


class DegenerateFitError(ValueError):
    """Too few usable points to fit a power law."""


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration entry."""
