"""Exception types shared across the package."""


class ProxAllocError(Exception):
    """Base class for all package errors."""


class NotStronglyConnected(ProxAllocError):
    """The digraph is not strongly connected."""


class NumericalFailure(ProxAllocError):
    """A numerical routine could not certify its result (e.g. the left
    null space of the Laplacian is not one-dimensional within tolerance)."""


class DimensionMismatch(ProxAllocError):
    """Vector or block shapes do not match the problem layout."""


class InfeasibleProblem(ProxAllocError):
    """No parameter choice can satisfy the feasibility inequalities."""


class ScaleTooLarge(ProxAllocError):
    """A brute-force routine was asked to exceed its size caps."""


class NonFiniteState(ProxAllocError):
    """The integrated state left the set of finite floats (step too large
    or parameters grossly infeasible)."""


class EstimatorSingular(ProxAllocError):
    """A diagonal entry of the eigenvector estimate fell below the
    positivity guard, so 1/y_ii is no longer trustworthy."""


class ValueUnavailable(ProxAllocError):
    """An operation needs a value handle (e.g. the smooth cost) that the
    agent specification did not provide."""


class ConfigError(ProxAllocError):
    """A scenario document failed validation; message carries the field path."""
