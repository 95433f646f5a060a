"""Long-term tidal perturbation dynamics: scale analysis, the eps-dependent
perturbation system, its homogenized limit, and the comparison harness."""

from .errors import DomainError, NumericError, SolverAbort
from .spectral import TorusGrid

__all__ = ["DomainError", "NumericError", "SolverAbort", "TorusGrid"]
__version__ = "0.1.0"
