"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AlphaBundleError(Exception):
    """Base class for all library errors."""


class DomainError(AlphaBundleError, ValueError):
    """A chart point or sample lies outside its open domain."""


class DomainMarginError(DomainError):
    """A finite-difference stencil would leave the parameter domain."""


class EvaluationError(AlphaBundleError, ArithmeticError):
    """An integrand or expression produced a non-finite value."""

    def __init__(self, message: str, node: float | None = None):
        super().__init__(message)
        self.node = node


class UnsupportedStrategyError(AlphaBundleError):
    """The requested expectation strategy cannot be used for this family."""


class SingularMetricError(AlphaBundleError, ArithmeticError):
    def __init__(self, eigenvalues):
        super().__init__(f"Fisher metric is not positive definite; eigenvalues={list(eigenvalues)}")
        self.eigenvalues = eigenvalues


class SingularFrameError(AlphaBundleError, ArithmeticError):
    """The frame matrix is (numerically) not invertible."""


class IntegrationError(AlphaBundleError, ArithmeticError):
    def __init__(self, message: str, last_sample=None):
        super().__init__(message)
        self.last_sample = last_sample


class LiftDegeneracyError(AlphaBundleError, ArithmeticError):
    def __init__(self, t: float, det: float):
        super().__init__(f"horizontal lift degenerated at t={t!r} (det A={det!r})")
        self.t = t
        self.det = det


class ParseError(AlphaBundleError, ValueError):
    """Malformed density expression; carries a 1-based line/column."""

    def __init__(self, message: str, line: int, column: int, pos: int = 0):
        super().__init__(f"{message} at line {line}, column {column}")
        self.msg = message
        self.line = line
        self.column = column
        self.pos = pos
