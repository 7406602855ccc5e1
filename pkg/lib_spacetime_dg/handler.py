import logging
from enum import Enum
from typing import Dict, Optional, Union

from .exceptions import (
    ConfigurationError,
    OutputError,
    SolverError,
    SpaceTimeError,
)
from .settings import study_settings
from .utils import ensure_string

logger = logging.getLogger(__name__)

DEFAULT_ERROR_DETAIL = "An unexpected error occurred."


class ErrorTypes(Enum):
    """
    Categories used in the failure summary. Library exceptions name their own
    category through `default_type`; builtin errors are mapped below.
    """

    configuration_error = "configuration_error"
    discretization_error = "discretization_error"
    linear_algebra_error = "linear_algebra_error"
    solver_error = "solver_error"
    io_error = "io_error"
    internal_error = "internal_error"


@ensure_string
def _get_error_type(exc) -> Union[str, ErrorTypes]:
    if hasattr(exc, "exception_type"):
        return exc.exception_type
    elif hasattr(exc, "default_type"):
        return exc.default_type

    if isinstance(exc, (ValueError, TypeError)):
        return ErrorTypes.configuration_error
    elif isinstance(exc, ArithmeticError):
        return ErrorTypes.linear_algebra_error
    elif isinstance(exc, OSError):
        return ErrorTypes.io_error

    return ErrorTypes.internal_error


@ensure_string
def _get_code(exc) -> str:
    if hasattr(exc, "get_codes"):
        code = exc.get_codes()
        if code:
            return code
    return "error"


@ensure_string
def _get_detail(exc) -> str:
    """
    Returns the human-friendly detail text. Library exceptions carry an explicit
    `detail`; builtin exceptions only expose their message.
    """
    if isinstance(getattr(exc, "detail", None), str):
        return str(exc.detail)
    if str(exc):
        return str(exc)
    return DEFAULT_ERROR_DETAIL


def _get_exit_code(exc) -> int:
    if hasattr(exc, "exit_code"):
        return exc.exit_code
    if isinstance(exc, (ValueError, TypeError)):
        return ConfigurationError.exit_code
    return SolverError.exit_code


def exception_reporter(exc: BaseException, context: Optional[Dict] = None) -> None:
    """
    Logs a failure. Configurable through the EXCEPTION_REPORTING setting.
    """
    context = context or {}
    if isinstance(exc, SolverError):
        logger.error(
            "solver failure on slab %s after %s iterations: %s",
            exc.slab_index, exc.iterations, exc,
        )
    elif isinstance(exc, OutputError):
        logger.error("output failure for %s: %s", exc.path, exc)
    elif isinstance(exc, SpaceTimeError):
        logger.error("%s (%s): %s", _get_error_type(exc), _get_code(exc), exc)
    else:
        logger.exception("unhandled error during %s", context.get("operation", "study"))


def exception_handler(exc: BaseException, context: Optional[Dict] = None) -> Optional[Dict]:
    if study_settings.DEBUG and not isinstance(exc, SpaceTimeError):
        # let the caller re-raise so the traceback stays visible
        return None

    study_settings.EXCEPTION_REPORTING(exc, context)

    return dict(
        type=_get_error_type(exc),
        code=_get_code(exc),
        detail=_get_detail(exc),
        attr=getattr(exc, "attr", None),
        exit_code=_get_exit_code(exc),
    )
