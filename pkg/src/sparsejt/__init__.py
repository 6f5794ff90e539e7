"""Joint-typicality support recovery: decoder, ensembles, bounds and Monte Carlo harness."""

from sparsejt.errors import BudgetError, ParameterError, RankDeficientError

__version__ = "0.1.0"

__all__ = ["BudgetError", "ParameterError", "RankDeficientError", "__version__"]
