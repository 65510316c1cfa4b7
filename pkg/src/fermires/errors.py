"""Exception types raised by the library."""


class FermiresError(Exception):
    """Base class for all library errors."""


class OutOfRange(FermiresError):
    """Free chart coordinates do not lie over the Fermi surface."""


class DegenerateBranch(FermiresError):
    """The solved coordinate sits where its sine vanishes; the chart is invalid."""


class AtCriticalPoint(FermiresError):
    """Point lies on (or numerically at) a critical point of the symbol."""


class OutsidePatch(FermiresError):
    """Chart coordinates fall outside the validity radius of a patch."""


class PreconditionViolated(FermiresError):
    pass


class EigenvalueCollision(FermiresError):
    """The Hessian has a repeated eigenvalue, so the eigen-rotation is undefined."""


class UnclassifiedPoint(FermiresError):
    """No normal-form case matches the measured Taylor coefficients."""


class EmptySupport(FermiresError):
    pass


class BudgetExceeded(FermiresError):
    """A quadrature or iteration budget was exhausted."""


class OnSpectrum(FermiresError):
    """Spectral parameter is real and inside [0, 12]."""


class NoConvergence(FermiresError):
    """Grid refinement hit its cap before the kernel converged."""
