"""Exception types shared across the package."""


class RcPomdpError(Exception):
    """Base class for all package errors."""


class SchemaError(RcPomdpError):
    """Model file does not match the expected JSON schema.

    ``field`` holds a dotted path to the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class StochasticityError(RcPomdpError):
    """A probability row fails its sum-to-one check."""


class ZeroProbabilityObservation(RcPomdpError):
    """Bayes update conditioned on an observation with (near-)zero probability."""


class NonConvergence(RcPomdpError):
    """Iterative bound computation exceeded its iteration cap."""


class EmptySet(RcPomdpError):
    """Alpha-vector evaluation over an empty set."""


class LPInfeasible(RcPomdpError):
    """Linear program has no feasible point."""


class LPUnbounded(RcPomdpError):
    """Linear program objective is unbounded."""


class InvalidParams(RcPomdpError):
    """Environment constructor received out-of-range parameters."""


class DeadBudget(RcPomdpError):
    """Closed-loop re-planning requested with a negative remaining budget."""
