"""Exception types carrying diagnostic payloads."""

from __future__ import annotations


class ConeViolationError(ValueError):
    """Spectrum lies outside the closed positivity cone.

    Carries the worst margin and the offending index tuple (1-based positions
    into the decreasing eigenvalue ordering).
    """

    def __init__(self, message, margin=None, witness=None):
        super().__init__(message)
        self.margin = margin
        self.witness = witness


class ConeBreachError(ConeViolationError):
    """A grid node's finite-difference Hessian left the closed cone."""

    def __init__(self, message, node=None, margin=None):
        super().__init__(message, margin=margin)
        self.node = node


class DivisionHazardError(ArithmeticError):
    """A tuple sum vanishes, so the quotient form of a derivative is unusable."""


class SamplerExhaustionError(RuntimeError):
    """Rejection sampling gave up; carries the request parameters."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = dict(params or {})


class StencilError(ValueError):
    """A finite-difference stencil reaches outside the grid."""


class BarrierOrderingError(RuntimeError):
    """A barrier candidate fails to dominate the solution."""


class SingularLinearizationError(RuntimeError):
    """The Newton linearization was singular or produced non-finite values."""


class GridMismatchError(ValueError):
    """Two grid fields do not share box and shape."""


class NonSymmetricPolynomialError(ValueError):
    """Input polynomial is not invariant under coordinate permutations."""


class ProblemFormatError(ValueError):
    """A problem definition file is malformed; names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"field {field!r}: {message}")
        self.field = field
