"""Exception hierarchy shared by every module of the package."""


class StellarCupError(Exception):
    """Base class for all package errors."""


class GraphError(StellarCupError, ValueError):
    """Malformed knowledge graph (self-loop, dangling endpoint, bad id)."""


class SamePairError(StellarCupError, ValueError):
    pass


class GenerationError(StellarCupError):
    pass


class FaultAssignmentError(StellarCupError, ValueError):
    pass


class MissingSlicesError(StellarCupError, KeyError):
    pass


class SliceError(StellarCupError, ValueError):
    pass


class UniverseTooLargeError(StellarCupError):
    pass


class TooFewNeighborsError(StellarCupError, ValueError):
    pass


class ViewTooSmallError(StellarCupError, ValueError):
    pass


class UnknownRecipientError(StellarCupError):
    pass


class BudgetExceededError(StellarCupError):
    """The simulation hit its step budget before reaching quiescence."""


class NoDecisionError(StellarCupError):
    """The simulation went quiescent while a process was still undecided."""


class ScenarioError(StellarCupError, ValueError):
    pass


class UnknownFigureError(StellarCupError, KeyError):
    pass
