"""Exception hierarchy shared by all modules."""


class EquilibriumError(Exception):
    """Base class for every error raised by the package."""


class DomainError(EquilibriumError):
    """A field was evaluated (or a stencil reached) outside its domain."""


class SingularAxisError(DomainError):
    """Basis vectors or an operator are undefined on a coordinate axis."""


class FireHoseError(EquilibriumError):
    """The map through sqrt(1 - tau) is undefined because tau >= 1."""


class DegenerateTransformError(EquilibriumError):
    """A surface function used as a multiplier vanishes (or nearly so)."""


class SurfaceLabelError(EquilibriumError):
    """The declared surface label is not constant along field lines."""


class RootSearchError(EquilibriumError):
    """Bracketing or polishing of a root failed."""


class DivergenceError(EquilibriumError):
    """An iterative solver did not converge.

    The update history is attached so callers can inspect how it failed.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class UndefinedCriterionError(EquilibriumError):
    """A stability criterion cannot be evaluated at the given point."""


class ConfigError(EquilibriumError):
    """Invalid run configuration."""


class DegenerateNormalizationError(EquilibriumError):
    """A closed-form solution's normalisation constant is singular."""
