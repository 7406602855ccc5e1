from typing import ClassVar, Dict

from django.utils.encoding import force_str
from rest_framework.exceptions import ErrorDetail


class SpaceTimeError(Exception):
    """
    Base class for library failures. `detail` is a DRF `ErrorDetail`, so the
    message text and its code travel together into the failure summary.
    """

    default_type: ClassVar[str] = "internal_error"
    default_code: ClassVar[str] = "error"
    default_detail: ClassVar[str] = "A space-time discretization error occurred."
    default_params: ClassVar[Dict] = {}
    exit_code: ClassVar[int] = 1

    def __init__(self, detail=None, code=None, params=None, attr=None):
        if detail is None:
            detail = self.default_detail
        if params is None:
            params = self.default_params

        text = force_str(detail)
        self.detail = ErrorDetail(text % params if params else text, code or self.default_code)
        self.params = params
        self.attr = attr
        super().__init__(str(self.detail))

    def get_codes(self) -> str:
        return self.detail.code


class ConfigurationError(SpaceTimeError):
    default_type = "configuration_error"
    default_code = "invalid"
    default_detail = "Invalid configuration."
    exit_code = 2


class UnsupportedDegreeError(SpaceTimeError, ValueError):
    default_type = "discretization_error"
    default_code = "unsupported_degree"
    default_detail = "Polynomial degree %(degree)s is outside the supported range [%(low)s, %(high)s]."


class DimensionMismatchError(SpaceTimeError, ValueError):
    default_type = "linear_algebra_error"
    default_code = "dimension_mismatch"
    default_detail = "Expected size %(expected)s, got %(actual)s."


class DoFIndexError(SpaceTimeError, IndexError):
    default_type = "discretization_error"
    default_code = "index_out_of_range"
    default_detail = "Index %(index)s is outside [0, %(size)s)."


class DegenerateCellError(SpaceTimeError, ValueError):
    default_type = "discretization_error"
    default_code = "degenerate_cell"
    default_detail = "Cell %(cell)s has a non-positive extent."


class PatternViolationError(SpaceTimeError, ValueError):
    default_type = "linear_algebra_error"
    default_code = "pattern_violation"
    default_detail = "Entry (%(row)s, %(col)s) is not part of the sparsity pattern."


class NotReinitializedError(SpaceTimeError, RuntimeError):
    default_type = "discretization_error"
    default_code = "not_reinitialized"
    default_detail = "Call reinit_space() and reinit_time() before evaluating %(what)s."


class NodeComputationError(SpaceTimeError, RuntimeError):
    default_type = "discretization_error"
    default_code = "no_convergence"
    default_detail = "Newton iteration for %(family)s nodes of degree %(degree)s did not converge."


class SolverError(SpaceTimeError, RuntimeError):
    default_type = "solver_error"
    default_code = "not_converged"
    default_detail = "Linear solver did not reach the requested tolerance."

    def __init__(self, detail=None, code=None, params=None, attr=None, slab_index=None, iterations=None):
        super().__init__(detail, code, params, attr)
        self.slab_index = slab_index
        self.iterations = iterations


class SingularMatrixError(SolverError):
    default_code = "singular_matrix"
    default_detail = "Matrix is numerically singular (pivot %(pivot)s at row %(row)s)."


class OutputError(SpaceTimeError, OSError):
    default_type = "io_error"
    default_code = "write_failed"
    default_detail = "Could not write %(path)s: %(reason)s"

    def __init__(self, detail=None, code=None, params=None, attr=None):
        SpaceTimeError.__init__(self, detail, code, params, attr)
        self.path = (params or {}).get("path")
