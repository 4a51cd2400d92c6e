"""Exception hierarchy shared by every toolkit module."""

from typing import Any, Optional

import numpy as np


class SontagToolkitError(Exception):
    """Base class of all toolkit errors."""


class ExpressionSyntaxError(SontagToolkitError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, position: int):
        super().__init__(f"Unknown identifier '{name}'", position)
        self.name = name


class DimensionError(SontagToolkitError, ValueError):
    pass


class NonFiniteError(SontagToolkitError, ArithmeticError):
    pass


class ClfViolationError(SontagToolkitError, ArithmeticError):
    """The λ equation has no positive root at x: b(x) vanishes while a(x) >= 0."""

    def __init__(self, x: Any, a: float, beta: float):
        self.x = np.asarray(x, dtype=float)
        self.a = float(a)
        self.beta = float(beta)
        super().__init__(
            f"CLF condition violated at x={self.x.tolist()}: a={self.a:.6g}, bRb={self.beta:.6g}"
        )


class ClfCheckError(SontagToolkitError, ValueError):
    def __init__(self, report: Any):
        self.report = report
        super().__init__(f"CLF check failed: {report.describe()}")


class WeightsError(SontagToolkitError, ValueError):
    def __init__(self, message: str, matrix: Optional[str] = None):
        super().__init__(message)
        self.matrix = matrix


class CareError(SontagToolkitError, RuntimeError):
    pass


class NotConvergedError(SontagToolkitError, RuntimeError):
    pass


class SimulationDivergedError(NonFiniteError):
    def __init__(self, message: str, trajectory: Any = None):
        super().__init__(message)
        self.trajectory = trajectory


class ValueConsistencyError(SontagToolkitError, ArithmeticError):
    def __init__(self, report: Any):
        self.report = report
        super().__init__(f"Value consistency check failed: {report.describe()}")


class CatalogError(SontagToolkitError, LookupError):
    pass


class ConfigError(SontagToolkitError, ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
