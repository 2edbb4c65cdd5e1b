"""
Exception hierarchy for the geodesic lab.

Every error carries a ``details`` dict so the run orchestrator can echo the
failing parameter, stencil location or residual history into reports.
"""

from typing import Any, Dict, List, Optional


class GeodesicLabError(Exception):
    """Base class for all lab errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"status": "error", "error": str(self), "kind": type(self).__name__, **self.details}


class DomainError(GeodesicLabError):
    """State lies outside the chart domain or too close to its singular locus."""


class DegenerateMetricError(GeodesicLabError):
    """Metric is singular (or not positive definite) at the evaluated point."""


class DerivativeError(GeodesicLabError):
    """Function evaluation failed inside a finite-difference stencil."""

    def __init__(self, message: str, stencil_index: int, offset: float):
        super().__init__(message, {"stencil_index": stencil_index, "offset": offset})
        self.stencil_index = stencil_index
        self.offset = offset


class StepFailedError(GeodesicLabError):
    """Implicit solve did not converge."""

    def __init__(self, message: str, residuals: List[float], step_index: Optional[int] = None):
        super().__init__(message, {"residuals": list(residuals), "step_index": step_index})
        self.residuals = list(residuals)
        self.step_index = step_index


class ConstraintSolveError(GeodesicLabError):
    """Lagrange-multiplier solve of a constrained step failed."""


class ParameterError(GeodesicLabError, ValueError):
    """Invalid constructor parameter."""

    def __init__(self, message: str, parameter: Optional[str] = None):
        super().__init__(message, {"parameter": parameter})
        self.parameter = parameter


class DegenerateLineError(GeodesicLabError):
    """Tangent line has the wrong number of tangency parameters (umbilic directions)."""


class NonGenericPointError(GeodesicLabError):
    """Reference bracket is rank deficient at the base point."""


class PreconditionError(GeodesicLabError):
    """Structural precondition of a construction does not hold."""


class ConfigError(GeodesicLabError):
    """Run config failed to parse or validate."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message, {"line": line, "field": field})
        self.line = line
        self.field = field
