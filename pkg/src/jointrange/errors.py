"""Exception hierarchy.

Every exception carries an ``exit_code`` used by the command line front end:
2 for malformed input, 3 for infeasible targets, 4 for exhausted capacity
(multiplicity, windows, dimension) and 5 for numerical breakdown.
"""

from __future__ import annotations


class JointRangeError(Exception):
    """Base class for all library errors."""

    exit_code = 5


class InputError(JointRangeError, ValueError):
    exit_code = 2


class DimensionMismatch(InputError):
    pass


class TupleLengthMismatch(InputError):
    pass


class NonOrthonormalFrame(InputError):
    pass


class NotUnitary(InputError):
    pass


class NotStrictContraction(InputError):
    pass


class InfeasibleError(JointRangeError):
    """The requested point or configuration is outside what can be realized."""

    exit_code = 3


class NotInRange(InfeasibleError):
    """Witness search exhausted its restarts.  Inconclusive, not a disproof."""

    def __init__(self, msg: str, best_residual: float = float("inf")):
        super().__init__(msg)
        self.best_residual = best_residual


class NotFound(InfeasibleError):
    def __init__(self, msg: str, best_residual: float = float("inf")):
        super().__init__(msg)
        self.best_residual = best_residual


class EmptyRegion(InfeasibleError):
    pass


class CenterOutside(InfeasibleError):
    pass


class TargetOutsidePolytope(InfeasibleError):
    pass


class InfeasibleTarget(InfeasibleError):
    pass


class SurrogateViolation(InfeasibleError):
    pass


class InsufficientStarCenter(InfeasibleError):
    pass


class CapacityError(JointRangeError):
    exit_code = 4


class LinearDependence(CapacityError):
    pass


class DimensionTooSmall(CapacityError):
    pass


class InsufficientMultiplicity(CapacityError):
    def __init__(self, msg: str, demand: int | None = None, reached: int | None = None):
        super().__init__(msg)
        self.demand = demand
        self.reached = reached


class HeadroomExhausted(CapacityError):
    pass


class WindowExhausted(CapacityError):
    def __init__(self, msg: str, demand: int | None = None):
        super().__init__(msg)
        self.demand = demand


class NumericalError(JointRangeError):
    exit_code = 5


class EigensolverFailure(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, msg: str, best_residual: float = float("inf")):
        super().__init__(msg)
        self.best_residual = best_residual


class SearchFailure(NumericalError):
    pass


class ConvexDecompositionFailure(NumericalError):
    pass


class BudgetExceeded(NumericalError):
    pass


class DegenerateWeights(NumericalError):
    pass
