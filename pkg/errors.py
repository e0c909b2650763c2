#!/usr/bin/env python3
"""
NMPC Error Hierarchy
====================

Exceptions shared by the dynamics, solver, certification and CLI layers.
Solver non-convergence is not an error: it is reported on the solution.
"""

from typing import Optional


class NmpcError(Exception):
    """Base class for every error raised by this package."""


class InputError(NmpcError, ValueError):
    """Arguments violate a documented precondition."""


class DivergenceError(NmpcError, ArithmeticError):
    """A state became non-finite during integration or rollout."""

    def __init__(self, message: str, index: Optional[int] = None, coordinate: Optional[int] = None):
        super().__init__(message)
        self.index = index
        self.coordinate = coordinate


class NumericError(NmpcError, ArithmeticError):
    """An iterative numerical procedure failed to converge."""


class ConsistencyError(NmpcError, RuntimeError):
    """Two pipeline stages disagree about a state they should share."""


class NotFoundError(NmpcError, LookupError):
    """A bounded search finished without a result."""


class UsageError(InputError):
    """Bad command-line flag or scenario field."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class RunAbortedError(DivergenceError):
    """Closed loop stopped early; `log` holds everything recorded so far."""

    def __init__(self, message: str, log=None, index: Optional[int] = None):
        super().__init__(message, index=index)
        self.log = log
