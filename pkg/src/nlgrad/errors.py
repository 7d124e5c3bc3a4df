"""Exception hierarchy shared by all nlgrad modules."""


class NLGradError(RuntimeError):
    """Base class for numerical failures inside nlgrad."""


class QuadratureError(NLGradError):
    """Adaptive quadrature did not reach the requested accuracy."""


class PositivityError(NLGradError):
    """A discrete Fourier symbol that must be positive is not."""


class ToleranceError(NLGradError):
    """A computed residual exceeds its acceptance tolerance."""


class ConvergenceError(NLGradError):
    """An iterative method exhausted its iteration budget."""
