"""Exception hierarchy shared across the toolkit.

The CLI maps these onto its exit-code contract: configuration and
admissibility problems exit 2, numerical failures exit 3, verification
failures exit 4.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration: unknown keys, bad types, missing files."""


class DimensionMismatchError(ToolkitError):
    """Operands have incompatible dimensions."""


class FactorizationError(ToolkitError):
    """Matrix is not symmetric positive definite, or a factorization failed."""


class AdmissibilityError(ConfigError):
    """A planner precondition fails. Subclasses name the violated bound."""


class StepSizeTooLargeError(AdmissibilityError):
    """Step size exceeds the contraction parametrization's h_max."""


class BiasDominatesError(AdmissibilityError):
    """epsilon <= 3*Gamma^2*b: the discretization bias dominates the budget.

    Decrease the step size h (shrinking b) or increase epsilon.
    """


class EpsilonOutOfRangeError(AdmissibilityError):
    """epsilon violates an admissible-interval endpoint."""


class InadmissibleToleranceError(AdmissibilityError):
    """(delta, Delta) violates the learning-phase admissibility interval."""


class ParameterError(AdmissibilityError):
    """A kernel preset parameter is out of its valid range."""


class DegenerateEnsembleError(ToolkitError):
    """An empirical estimate is numerically singular (try a larger N)."""


class NumericalFailureError(ToolkitError):
    """A chain produced a non-finite state or gradient."""

    def __init__(self, message: str, state=None, iteration: int | None = None):
        super().__init__(message)
        self.state = state
        self.iteration = iteration


class OracleTooLargeError(ToolkitError):
    """Joint-law construction exceeds the d*N size guard."""


class OracleUnsupportedError(ConfigError):
    """The exact oracle only supports Gaussian targets."""


class RefuseToRunError(ToolkitError):
    """A consequence check was invoked before its precondition was verified."""
