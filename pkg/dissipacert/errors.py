"""Exception hierarchy shared by every dissipacert module."""
from typing import Any, List, Optional


class DissipacertError(Exception):
    """Base class for all dissipacert errors."""


class SpecError(DissipacertError, ValueError):
    """Malformed input: wrong dimensions, bad tags, invalid parameters."""


class NumericalError(DissipacertError):
    """A numerical routine failed (eigen-decomposition, search budget)."""


class SingularBlock(DissipacertError):
    """A block that has to be inverted is singular."""


class SingularSupply(SingularBlock):
    """The supply-rate matrix S is singular."""


class AssumptionError(DissipacertError):
    """A standing assumption (A1 on S, A2 on the noise model) is violated."""


class NotApplicable(DissipacertError):
    """The operation's hypothesis does not hold for this input."""


class DataInconsistent(DissipacertError):
    """The data cannot have been produced under the claimed noise model."""


class SamplingStarved(DissipacertError):
    """Too few candidates were accepted; partial results are attached."""

    def __init__(self, message: str, systems: Optional[List[Any]] = None,
                 attempted: int = 0, accepted: int = 0):
        super().__init__(message)
        self.systems = systems or []
        self.attempted = attempted
        self.accepted = accepted


class InconclusiveError(DissipacertError):
    """The solver ended inside the numerical band; evidence is attached."""

    def __init__(self, message: str, evidence: Any = None):
        super().__init__(message)
        self.evidence = evidence
