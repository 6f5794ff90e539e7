"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument or configuration value."""


class BudgetError(RuntimeError):
    """Exhaustive subset search would exceed the configured budget."""


class RankDeficientError(ArithmeticError):
    """A submatrix failed the numerical full-column-rank test."""
