"""Exception hierarchy shared by every layer of the package."""


class WaveguideMPSError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(WaveguideMPSError, ValueError):
    """Tensor extents do not match."""


class ArgumentError(WaveguideMPSError, ValueError):
    """An argument violates a documented precondition."""


class NumericError(WaveguideMPSError, ArithmeticError):
    """A linear-algebra kernel failed (e.g. SVD did not converge)."""

    def __init__(self, message, shape=None):
        super().__init__(message if shape is None else f"{message} (shape={tuple(shape)})")
        self.shape = shape


class ResourceError(WaveguideMPSError, RuntimeError):
    """A configured resource ceiling (bond dimension, Hilbert-space size) was exceeded.

    ``diagnostics`` carries whatever partial information was gathered before the abort.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigurationError(WaveguideMPSError, ValueError):
    """A model or experiment configuration is invalid."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ConvergenceError(WaveguideMPSError, RuntimeError):
    """An iterative procedure failed to converge; ``trace`` holds its history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ModelError(WaveguideMPSError, ValueError):
    """The physical model is unsuitable for the requested solver (e.g. unstable quadratic form)."""


class SpectrumError(WaveguideMPSError, ValueError):
    """No momentum bin carries enough input weight to define a ratio."""


class InconsistentRunError(WaveguideMPSError, RuntimeError):
    """Observables violate a physical bound beyond tolerance (e.g. negative inelastic weight)."""
