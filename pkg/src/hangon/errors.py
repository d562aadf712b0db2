"""Exception hierarchy shared by every module of the simulator."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all errors raised by hangon."""


class ZeroNorm(SimulationError, ValueError):
    pass


class DimensionMismatch(SimulationError, ValueError):
    pass


class BadDimension(DimensionMismatch):
    """A register has the wrong dimension for the requested operation."""


class UnknownRegister(SimulationError, LookupError):
    pass


class DuplicateRegister(SimulationError, ValueError):
    pass


class NonUnitary(SimulationError, ValueError):
    pass


class InvalidProjectors(SimulationError, ValueError):
    """Projectors are not Hermitian, idempotent, orthogonal and complete."""


class UnknownLabel(SimulationError, LookupError):
    pass


class StateTooLarge(SimulationError):
    pass


class ZeroWeightBranch(SimulationError):
    """Conditioning on an outcome whose Born weight is below the 1e-12 floor."""


class DuplicateAgent(SimulationError, ValueError):
    pass


class UnknownAgent(SimulationError, LookupError):
    pass


class UnknownEvent(SimulationError, LookupError):
    pass


class ImmutableMemory(SimulationError):
    """A unitary tried to act on a write-once memory register."""


class ForbiddenComparison(SimulationError):
    """A request for a joint statement about two agents' private outcomes."""


class OutcomeSpaceMismatch(SimulationError, ValueError):
    pass


class UnknownScenario(SimulationError, LookupError):
    pass


class BadParams(SimulationError, ValueError):
    pass


class ScriptError(SimulationError, ValueError):
    """Malformed or inconsistent scenario script."""


class AssertionFailed(SimulationError):
    """An AssertDistribution step of a script did not hold."""


class PreconditionNotMet(SimulationError):
    pass


class WrongScenario(SimulationError, ValueError):
    pass
