"""Exception hierarchy shared across the package."""


class EntrofluxError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EntrofluxError, ValueError):
    """Invalid model parameters or run configuration."""


class DomainError(EntrofluxError, ValueError):
    """A state lies on or outside the boundary of the admissible set."""


class PreconditionError(EntrofluxError, ValueError):
    """A structural assumption required by a bound or lemma is violated."""


class NumericalError(EntrofluxError, RuntimeError):
    """An iterative method failed to converge.

    Parameters
    ----------
    message : str
    residual : float, optional
        Size of the residual when the iteration stopped.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepFailure(NumericalError):
    """A time step could not be completed after all fallbacks.

    The ``stats`` attribute carries the per-attempt diagnostics and
    ``trajectory`` (set by :func:`entroflux.solver.run`) the partial output.
    """

    def __init__(self, message, residual=None, stats=None):
        super().__init__(message, residual)
        self.stats = stats or []
        self.trajectory = None


class DegenerateFitError(EntrofluxError, ValueError):
    """Decay fit requested on a series that has already converged."""
