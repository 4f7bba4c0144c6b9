"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ParameterError/StructuralError -> 2,
DomainError/ExistenceError -> 3, InvariantFailure -> 4.
"""


class FpdynError(Exception):
    pass


class ParameterError(FpdynError):
    """An argument is outside its admissible range."""


class StructuralError(FpdynError):
    """Shapes or index sets are inconsistent."""


class DomainError(FpdynError):
    """A computed value fell outside its mathematical domain.

    Carries the offending value in ``payload`` when available.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class ExistenceError(FpdynError):
    """The requested object (periodic orbit, fixed point) does not exist here."""


class ClassificationError(FpdynError):
    """A restricted game is non-generic and cannot be classified."""


class AmbiguousFlowError(FpdynError):
    """The flow is not uniquely defined at the current state.

    Raised when a tied pair has zero separation rate under the active
    targets (a non-transversal indifference line, possible only at the
    degenerate parameter values) or at a genuinely non-unique point.
    """

    def __init__(self, message, player=None, pair=None):
        super().__init__(message)
        self.player = player
        self.pair = pair


class ModelFitError(FpdynError):
    """A fitted map failed its verification residual."""


class SearchError(FpdynError):
    """A bracketed search found no sign change."""


class InvariantFailure(FpdynError):
    """An internal consistency check failed."""
