"""
Decorator utilities for numerical operations.

This module provides decorators for the cross-cutting concerns of the
estimation routines: consistent logging of failures and translation of raw
floating-point faults into the package's exception hierarchy.
"""

import functools
import logging
import math
from typing import Callable, TypeVar

from .exceptions import BranchBayesError, ConsistencyCheckError, NumericalError

logger = logging.getLogger(__name__)

T = TypeVar('T')  # Return type for generic functions


def with_error_handling(func: Callable[..., T]) -> Callable[..., T]:
    """
    Decorator that handles numerical faults and provides consistent logging.

    Package errors are logged and re-raised unchanged. Floating-point faults
    (overflow, division by zero) are converted to NumericalError.

    Args:
        func: The function to decorate

    Returns:
        Decorated function
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> T:
        try:
            return func(*args, **kwargs)
        except NumericalError as e:
            logger.error(f"{type(e).__name__} in {func.__name__}: {e}")
            raise
        except BranchBayesError as e:
            logger.debug(f"{type(e).__name__} in {func.__name__}: {e}")
            raise
        except (FloatingPointError, OverflowError, ZeroDivisionError) as e:
            logger.error(f"Numerical fault in {func.__name__}: {e}", exc_info=True)
            raise NumericalError(f"Numerical fault in {func.__name__}: {e}") from e

    return wrapper


def check_close(name: str, first: float, second: float, rel_tol: float, abs_tol: float = 0.0) -> None:
    """
    Cross-assert that two independently computed values agree.

    Raises:
        ConsistencyCheckError: If the values differ beyond tolerance.
    """
    if not math.isclose(first, second, rel_tol=rel_tol, abs_tol=abs_tol):
        raise ConsistencyCheckError(
            f"{name}: {first!r} and {second!r} differ beyond rel_tol={rel_tol}, abs_tol={abs_tol}"
        )
