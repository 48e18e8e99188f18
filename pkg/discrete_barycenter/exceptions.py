"""
Exceptions raised by the barycenter solver.
"""


class BarycenterError(Exception):
    """
    Base class for all errors raised by this package.
    """


class InstanceError(BarycenterError, ValueError):
    """
    An instance (or an instance file) violates the measure invariants.
    """


class CapacityError(BarycenterError):
    """
    A problem is too large for the configured index width, memory cap or oracle cap.
    """

    def __init__(self, message, required=None, limit=None):
        super().__init__(message)
        self.required = required
        self.limit = limit


class ContractError(BarycenterError):
    """
    An internal pre- or postcondition does not hold.
    """


class SimplexError(BarycenterError):
    """
    The simplex kernel could not finish (iteration limit reached).
    """


class NumericalError(SimplexError):
    """
    A basis factorization was singular or too badly conditioned to trust.
    """


class MasterError(BarycenterError):
    """
    The restricted master problem did not solve to optimality.
    """
