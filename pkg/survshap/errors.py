"""Exceptions raised by survshap

The command line maps ``SchemaError`` (and any ``ValueError``) to exit code 2 and
``ComputationError`` to exit code 3.
"""


class SurvShapError(Exception):
    """Base class for all survshap errors"""


class SchemaError(SurvShapError, ValueError):
    """An input file or dataset does not match the expected layout"""


class MethodRefusedError(SurvShapError, ValueError):
    """The requested estimator is not allowed for this input"""


class ComputationError(SurvShapError):
    """A numerical routine could not produce a valid result"""


class ConvergenceError(ComputationError):
    def __init__(self, message: str, gradient_norm: float):
        super().__init__(f"{message} (last gradient norm {gradient_norm:.3e})")
        self.gradient_norm = gradient_norm


class SingularMatrixError(ComputationError):
    def __init__(self, message: str, dimension: int, name: str | None = None):
        label = f"{dimension}" if name is None else f"{dimension} ({name})"
        super().__init__(f"{message}: offending dimension {label}")
        self.dimension = dimension
        self.name = name


class RankDeficientDesignError(ComputationError):
    """The coalition design does not identify every attribution"""


class GenerationError(ComputationError):
    """Synthetic data could not be generated for one draw"""
