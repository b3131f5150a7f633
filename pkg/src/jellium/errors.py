"""Exception types raised by the toolkit."""


class JelliumError(Exception):
    """Base class for all computational failures in this package."""


class ResourceError(JelliumError, MemoryError):
    """A requested discretization exceeds the configured memory budget."""


class OutOfBandError(JelliumError, KeyError):
    """A band-limited object was queried at a mode it does not carry."""


class DomainError(JelliumError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class IncompatibleModeSetError(JelliumError, ValueError):
    """Two objects live on different Fourier mode sets."""


class NotAGroundStateError(JelliumError, ValueError):
    """An ion arrangement fails the flat-density identity."""

    def __init__(self, message, worst_k=None, residual=None):
        super().__init__(message)
        self.worst_k = worst_k
        self.residual = residual


class InvalidExpansionPointError(JelliumError, ValueError):
    """The Hessian was requested at a state that is not a periodic ground state."""


class StepSizeError(JelliumError, RuntimeError):
    """The fixed-point iteration of an implicit step did not converge."""


class BlowUpError(JelliumError, RuntimeError):
    """The energy drift exceeded the configured safety bound."""


class EigenSolverError(JelliumError, RuntimeError):
    """The dense symmetric eigensolver failed."""
