"""
Space-time element evaluation on one (cell, interval) pair of a slab.

Shape functions are products phi_t(t) * phi_x(x). Element-local indices follow
the global space-major rule, i = i_x + n_x_cell * i_t, and quadrature points are
ordered q = q_x + nq_x * q_t, so every combined table is a Kronecker product of
a temporal and a spatial table.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .exceptions import DimensionMismatchError, DoFIndexError, NotReinitializedError
from .linalg import StVector
from .slab import Slab
from .spatial_fe import (
    QLagrangeElement,
    SpatialDoFHandler,
    SpatialQuadrature,
    cell_jacobian,
    make_spatial_quadrature,
)
from .temporal_fe import TemporalBasis, TemporalQuadrature, make_gauss_quadrature


@dataclass(frozen=True)
class StQuadrature:
    time: TemporalQuadrature
    space: SpatialQuadrature

    @property
    def size(self) -> int:
        return self.time.size * self.space.size

    @property
    def points_time(self) -> np.ndarray:
        return np.repeat(self.time.points, self.space.size)

    @property
    def points_space(self) -> np.ndarray:
        return np.tile(self.space.points, (self.time.size, 1))

    @property
    def weights(self) -> np.ndarray:
        return np.kron(self.time.weights, self.space.weights)


def make_st_quadrature(n_time_points: int, n_space_points_1d: int, dim: int) -> StQuadrature:
    return StQuadrature(make_gauss_quadrature(n_time_points), make_spatial_quadrature(n_space_points_1d, dim))


def get_local_dof_indices(slab: Slab, cell: int, m: int) -> np.ndarray:
    """
    Global slab indices of the local DoFs of (cell, interval m), local order
    i_x + n_x_cell * i_t.
    """
    if not 0 <= m < slab.n_intervals:
        raise DoFIndexError(params={"index": m, "size": slab.n_intervals})
    spatial = slab.dof_handler.cell_dofs[cell]
    temporal = slab.temporal_offset(m) + np.arange(slab.basis.n_dofs)
    return (spatial[None, :] + slab.n_x * temporal[:, None]).ravel()


def _coefficients(u: Union[StVector, np.ndarray], expected: int) -> np.ndarray:
    values = u.values if isinstance(u, StVector) else np.asarray(u, dtype=float)
    if values.shape != (expected,):
        raise DimensionMismatchError(params={"expected": expected, "actual": values.shape})
    return values


class StFeValues:
    """
    Cached shape data for a tensor-product space-time element.

    reinit_space() updates the spatial geometry; reinit_time() only rescales the
    temporal part, so an inner loop over the intervals of a slab reuses the
    spatial data of the current cell.
    """

    def __init__(
            self,
            basis: TemporalBasis,
            element: QLagrangeElement,
            n_time_points: Optional[int] = None,
            n_space_points_1d: Optional[int] = None,
            quadrature: Optional[StQuadrature] = None,
    ):
        self.basis = basis
        self.element = element
        # an explicit rule wins over the point counts
        self.quadrature = quadrature or make_st_quadrature(
            n_time_points or basis.degree + 2,
            n_space_points_1d or element.degree + 2,
            element.dim,
        )
        time, space = self.quadrature.time, self.quadrature.space
        self._phi_t = basis.shape_values(time.points)
        self._dphi_t = basis.shape_dts(time.points)
        self._phi_x = element.shape_values(space.points)
        self._grad_x_ref = element.shape_grads(space.points)

        self._values = np.kron(self._phi_t, self._phi_x)
        self._dts_ref = np.kron(self._dphi_t, self._phi_x)

        self._dof_handler: Optional[SpatialDoFHandler] = None
        self._cell: Optional[int] = None
        self._slab: Optional[Slab] = None
        self._interval: Optional[int] = None

    @property
    def n_dofs(self) -> int:
        return self.basis.n_dofs * self.element.n_dofs

    @property
    def n_quadrature_points(self) -> int:
        return self.quadrature.size

    @property
    def cell(self) -> Optional[int]:
        return self._cell

    @property
    def interval(self) -> Optional[int]:
        return self._interval

    def reinit_space(self, dof_handler: SpatialDoFHandler, cell: int) -> None:
        det_j, inv_h = cell_jacobian(dof_handler.mesh, cell)
        lower, upper = dof_handler.mesh.cell_bounds(cell)
        grad_x = self._grad_x_ref * inv_h

        self._dof_handler = dof_handler
        self._cell = cell
        self._det_j = det_j
        self._grad_x = grad_x
        self._points_x = lower + (upper - lower) * self.quadrature.space.points
        nq, n = self.n_quadrature_points, self.n_dofs
        self._space_grads = np.einsum("ab,cde->acbde", self._phi_t, grad_x).reshape(nq, n, self.element.dim)

    def reinit_time(self, slab: Slab, m: int) -> None:
        t0, t1 = slab.interval_bounds(m)
        self._slab = slab
        self._interval = m
        self._t0 = t0
        self._k = t1 - t0

    def _require(self, what: str) -> None:
        if self._cell is None or self._interval is None:
            raise NotReinitializedError(params={"what": what})

    def _check(self, i: int, q: int) -> None:
        if not 0 <= i < self.n_dofs:
            raise DoFIndexError(params={"index": i, "size": self.n_dofs})
        if not 0 <= q < self.n_quadrature_points:
            raise DoFIndexError(params={"index": q, "size": self.n_quadrature_points})

    # tables, shape (n_quadrature_points, n_dofs[, dim])

    @property
    def shape_values(self) -> np.ndarray:
        self._require("shape_values")
        return self._values

    @property
    def shape_dts(self) -> np.ndarray:
        self._require("shape_dts")
        return self._dts_ref / self._k

    @property
    def shape_space_grads(self) -> np.ndarray:
        self._require("shape_space_grads")
        return self._space_grads

    @property
    def JxW_values(self) -> np.ndarray:
        self._require("JxW")
        return np.kron(self.quadrature.time.weights * self._k, self.quadrature.space.weights * self._det_j)

    @property
    def quadrature_points_time(self) -> np.ndarray:
        self._require("quadrature points")
        return self._t0 + self._k * self.quadrature.points_time

    @property
    def quadrature_points_space(self) -> np.ndarray:
        self._require("quadrature points")
        return np.tile(self._points_x, (self.quadrature.time.size, 1))

    # scalar accessors

    def shape_value(self, i: int, q: int) -> float:
        self._require("shape_value")
        self._check(i, q)
        return float(self._values[q, i])

    def shape_dt(self, i: int, q: int) -> float:
        self._require("shape_dt")
        self._check(i, q)
        return float(self._dts_ref[q, i] / self._k)

    def shape_space_grad(self, i: int, q: int) -> np.ndarray:
        self._require("shape_space_grad")
        self._check(i, q)
        return self._space_grads[q, i].copy()

    def JxW(self, q: int) -> float:
        self._check(0, q)
        return float(self.JxW_values[q])

    def time_quadrature_point(self, q: int) -> float:
        self._check(0, q)
        return float(self.quadrature_points_time[q])

    def space_quadrature_point(self, q: int) -> np.ndarray:
        self._check(0, q)
        return self.quadrature_points_space[q]

    # finite element functions

    def get_local_dof_indices(self) -> np.ndarray:
        self._require("local dof indices")
        return get_local_dof_indices(self._slab, self._cell, self._interval)

    def _local_coefficients(self, u) -> np.ndarray:
        self._require("function values")
        return _coefficients(u, self._slab.n_dofs)[self.get_local_dof_indices()]

    def get_function_values(self, u) -> np.ndarray:
        return self.shape_values @ self._local_coefficients(u)

    def get_function_dt(self, u) -> np.ndarray:
        return self.shape_dts @ self._local_coefficients(u)

    def get_function_space_gradients(self, u) -> np.ndarray:
        return np.einsum("qid,i->qd", self.shape_space_grads, self._local_coefficients(u))


class StJumpValues:
    """
    One-sided temporal limits of space-time shape functions at an interval
    boundary, evaluated at the spatial quadrature points of a cell. Plus values
    use the left limits of the later interval, minus values the right limits of
    the earlier one.
    """

    def __init__(self, basis: TemporalBasis, element: QLagrangeElement, n_space_points_1d: Optional[int] = None):
        self.basis = basis
        self.element = element
        self.quadrature = make_spatial_quadrature(n_space_points_1d or element.degree + 2, element.dim)
        self.limit_left = basis.limit_left()
        self.limit_right = basis.limit_right()
        self._phi_x = element.shape_values(self.quadrature.points)
        self._plus = np.kron(self.limit_left[None, :], self._phi_x)
        self._minus = np.kron(self.limit_right[None, :], self._phi_x)
        self._cell: Optional[int] = None

    @property
    def n_dofs(self) -> int:
        return self.basis.n_dofs * self.element.n_dofs

    def reinit_space(self, dof_handler: SpatialDoFHandler, cell: int) -> None:
        self._det_j, _ = cell_jacobian(dof_handler.mesh, cell)
        self._cell = cell

    def _require(self, what: str) -> None:
        if self._cell is None:
            raise NotReinitializedError(params={"what": what})

    @property
    def spatial_values(self) -> np.ndarray:
        return self._phi_x

    @property
    def shape_values_plus(self) -> np.ndarray:
        return self._plus

    @property
    def shape_values_minus(self) -> np.ndarray:
        return self._minus

    @property
    def JxW_values(self) -> np.ndarray:
        self._require("JxW")
        return self.quadrature.weights * self._det_j

    def local_mass(self) -> np.ndarray:
        """
        Spatial cell mass matrix, the kernel of every jump and initial term.
        """
        return (self._phi_x.T * self.JxW_values) @ self._phi_x

    def _check(self, i: int, q: int) -> None:
        if not 0 <= i < self.n_dofs:
            raise DoFIndexError(params={"index": i, "size": self.n_dofs})
        if not 0 <= q < self.quadrature.size:
            raise DoFIndexError(params={"index": q, "size": self.quadrature.size})

    def shape_value_plus(self, i: int, q: int) -> float:
        self._check(i, q)
        return float(self._plus[q, i])

    def shape_value_minus(self, i: int, q: int) -> float:
        self._check(i, q)
        return float(self._minus[q, i])

    def get_function_plus(self, u, slab: Slab, m: int) -> np.ndarray:
        """
        u^+ at the start of interval m of `slab`.
        """
        self._require("get_function_plus")
        local = _coefficients(u, slab.n_dofs)[get_local_dof_indices(slab, self._cell, m)]
        return self._plus @ local

    def get_function_minus(self, u, slab: Slab, m: int) -> np.ndarray:
        """
        u^- at the end of interval m of `slab`.
        """
        self._require("get_function_minus")
        local = _coefficients(u, slab.n_dofs)[get_local_dof_indices(slab, self._cell, m)]
        return self._minus @ local


def interpolate(slab: Slab, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> StVector:
    """
    Nodal interpolant: func(t, x) evaluated at every (node time, support point).
    """
    points = slab.dof_handler.support_points
    blocks = [
        np.broadcast_to(np.asarray(func(np.full(slab.n_x, t), points), dtype=float), (slab.n_x,))
        for t in slab.node_times()
    ]
    return StVector(np.concatenate(blocks), slab.n_x)
