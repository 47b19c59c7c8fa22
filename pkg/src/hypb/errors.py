"""Shared exception types.

The CLI maps these to its exit-code contract: input problems exit 1,
indeterminate outcomes (budget exhaustion and the like) exit 2.
"""


class HypbError(Exception):
    """Base class for all package errors."""


class CoincidentPoints(HypbError):
    """Two points too close to span a geodesic."""


class NotConcurrent(HypbError):
    """Angle requested at a point not on both geodesics."""


class NotUltraparallel(HypbError):
    """Common perpendicular requested for lines that meet."""


class NotInterior(HypbError):
    """Billiard start point not strictly inside the polygon."""


class ImmediateRepeat(HypbError):
    """Bounce word repeats a label in adjacent positions."""

    def __init__(self, position):
        self.position = position
        super().__init__(f"label repeated at position {position}")


class BudgetExceeded(HypbError):
    """Enumeration request beyond the supported budget."""


class AngleSumViolation(HypbError):
    """Angle data incompatible with a compact hyperbolic polygon."""


class NoConvergence(HypbError):
    """Closure solver failed to reach tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations, residual {residual:.3e}"
        )


class InfeasibleParams(HypbError):
    """Deformation parameters admit no simple polygon."""


class NotHyperbolic(HypbError):
    """Signature or angle data with non-positive area."""


class InvalidData(HypbError):
    """Structurally invalid input data."""
