"""Exception types shared across the package."""


class HomtestError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(HomtestError, ValueError):
    """A document or argument does not describe a valid object.

    ``key`` names the offending field or vertex when one can be identified.
    """

    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class OracleBudgetExceeded(HomtestError, RuntimeError):
    """The exact search visited more nodes than it was allowed to."""


class SizeGuardExceeded(HomtestError, RuntimeError):
    """An input is larger than a configured cap for an expensive routine."""


class Unsatisfiable(HomtestError):
    """The instance admits no list-homomorphism."""


class NoSublinearTester(HomtestError):
    """The target graph is not bi-arc, so only linear-query testing is possible."""


class FarUnreachable(HomtestError):
    """A perturbation could not push an assignment to the requested distance."""
