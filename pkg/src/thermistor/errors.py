"""Exception hierarchy shared by all solver modules."""


class ThermistorError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(ThermistorError):
    """Invalid parameters or an inconsistent configuration."""


class SingularEvaluationError(ThermistorError):
    """sigma evaluated at zero gradient with p < 2 and delta = 0."""


class MeshError(ThermistorError):
    pass


class AssemblyError(ThermistorError):
    pass


class ConstraintError(ThermistorError):
    pass


class StructuralError(ThermistorError):
    """A constitutive law fails a structural hypothesis on the scanned range."""


class SolverDivergenceError(ThermistorError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NonconvergenceError(ThermistorError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CouplingDivergenceError(ThermistorError):
    def __init__(self, message, history=None, partial=None):
        super().__init__(message)
        self.history = list(history or [])
        self.partial = partial
