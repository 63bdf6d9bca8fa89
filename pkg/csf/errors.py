"""Exception hierarchy shared by every library module.

Command modules catch `CSFError` and turn it into a non-zero exit code;
anything else is treated as a bug and reported as a runtime error.
"""

from __future__ import annotations

from typing import Optional


class CSFError(Exception):
    """Base class for expected, user-facing failures."""


class DatasetError(CSFError):
    """Malformed dataset directory. Names the file and (1-based) line."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = f'{path}:{line}: ' if line is not None else f'{path}: '
        super().__init__(f'{where}{message}')


class GraphError(CSFError):
    pass


class ParameterError(CSFError):
    pass


class DomainError(CSFError):
    pass


class KernelError(CSFError):
    pass


class NotPSDError(KernelError):
    def __init__(self, min_eigenvalue: float, tol: float):
        self.min_eigenvalue = float(min_eigenvalue)
        self.tol = float(tol)
        super().__init__(f'not PSD: minimum eigenvalue {self.min_eigenvalue:.6g} < -{self.tol:g}')


class NumericError(CSFError):
    pass


class ConvergenceError(NumericError):
    pass


class TrainingError(CSFError):
    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        if epoch is not None:
            message = f'epoch {epoch}: {message}'
        super().__init__(message)


class ConfigError(CSFError):
    pass
