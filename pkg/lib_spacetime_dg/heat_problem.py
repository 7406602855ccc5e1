"""
cG(s)dG(r) discretisation of the unit-diffusion heat equation

    d_t u - Laplace u = f  in (0, T) x (0, 1)^dim,  u = g on the boundary,  u(0) = u_0,

assembled and solved slab by slab. The final trace of each slab is the initial
value of the next one.
"""
import abc
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, SolverError
from .linalg import (
    DEFAULT_MAX_ITER,
    DEFAULT_RESTART,
    DEFAULT_RTOL,
    DENSE_LU_LIMIT,
    CsrMatrix,
    StVector,
    solve_dense_lu,
    solve_direct,
    solve_gmres_ilu0,
)
from .slab import Slab, SpaceTimeTriangulation, TimeIteratorCollection, nonzero_limit_indices
from .spatial_fe import boundary_dofs
from .st_values import StFeValues, StJumpValues, get_local_dof_indices

logger = logging.getLogger(__name__)

SOLVERS = ("gmres", "direct")


class HeatProblemData(abc.ABC):
    """
    Data of a heat problem. Points are arrays of shape (n, dim); times broadcast
    against the first axis.
    """

    @abc.abstractmethod
    def rhs(self, t, x) -> np.ndarray:
        ...

    @abc.abstractmethod
    def boundary_value(self, t, x) -> np.ndarray:
        ...

    @abc.abstractmethod
    def initial_value(self, x) -> np.ndarray:
        ...


class ManufacturedSolution(HeatProblemData):
    """
    A closed-form solution; data and the right-hand side follow from it.
    """

    @abc.abstractmethod
    def value(self, t, x) -> np.ndarray:
        ...

    @abc.abstractmethod
    def time_derivative(self, t, x) -> np.ndarray:
        ...

    @abc.abstractmethod
    def gradient(self, t, x) -> np.ndarray:
        ...

    @abc.abstractmethod
    def laplacian(self, t, x) -> np.ndarray:
        ...

    def rhs(self, t, x) -> np.ndarray:
        return self.time_derivative(t, x) - self.laplacian(t, x)

    def boundary_value(self, t, x) -> np.ndarray:
        return self.value(t, x)

    def initial_value(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.value(np.zeros(x.shape[0]), x)


class MovingPeakSolution(ManufacturedSolution):
    """
    A peak u = 1 / (1 + a * |x - c(t)|^2) circling the domain centre once per
    time unit. In 1D only the first coordinate of the centre is used.
    """

    def __init__(self, dim: int = 2, steepness: float = 50.0):
        if dim not in (1, 2):
            raise ConfigurationError(
                "Moving-peak solution exists for dim 1 and 2, got %(value)s.", params={"value": dim}, attr="dim"
            )
        self.dim = dim
        self.steepness = steepness

    def __repr__(self):
        return "MovingPeakSolution(dim=%d, steepness=%g)" % (self.dim, self.steepness)

    def _center(self, t) -> Tuple[np.ndarray, np.ndarray]:
        angle = 2.0 * np.pi * np.asarray(t, dtype=float)
        center = np.stack([0.5 + 0.25 * np.cos(angle), 0.5 + 0.25 * np.sin(angle)], axis=-1)
        velocity = np.stack([-0.5 * np.pi * np.sin(angle), 0.5 * np.pi * np.cos(angle)], axis=-1)
        return center[..., :self.dim], velocity[..., :self.dim]

    def _parts(self, t, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        center, velocity = self._center(t)
        offset = x - center
        rho = np.sum(offset ** 2, axis=-1)
        denominator = 1.0 + self.steepness * rho
        return offset, velocity, rho, denominator

    def value(self, t, x) -> np.ndarray:
        _, _, _, denominator = self._parts(t, x)
        return 1.0 / denominator

    def time_derivative(self, t, x) -> np.ndarray:
        offset, velocity, _, denominator = self._parts(t, x)
        rho_dt = -2.0 * np.sum(offset * velocity, axis=-1)
        return -self.steepness * rho_dt / denominator ** 2

    def gradient(self, t, x) -> np.ndarray:
        offset, _, _, denominator = self._parts(t, x)
        return -2.0 * self.steepness * offset / (denominator ** 2)[..., None]

    def laplacian(self, t, x) -> np.ndarray:
        _, _, rho, denominator = self._parts(t, x)
        a = self.steepness
        return -2.0 * self.dim * a / denominator ** 2 + 8.0 * a ** 2 * rho / denominator ** 3


class ConstantSolution(ManufacturedSolution):
    def __init__(self, constant: float = 1.0):
        self.constant = float(constant)

    def __repr__(self):
        return "ConstantSolution(%g)" % self.constant

    def value(self, t, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.full(x.shape[0], self.constant)

    def time_derivative(self, t, x) -> np.ndarray:
        return np.zeros(np.atleast_2d(x).shape[0])

    def gradient(self, t, x) -> np.ndarray:
        return np.zeros_like(np.atleast_2d(np.asarray(x, dtype=float)))

    def laplacian(self, t, x) -> np.ndarray:
        return np.zeros(np.atleast_2d(x).shape[0])


@dataclass(frozen=True)
class SolverOptions:
    solver: str = "gmres"
    rtol: float = DEFAULT_RTOL
    max_iter: int = DEFAULT_MAX_ITER
    restart: int = DEFAULT_RESTART
    workers: int = 1

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigurationError(
                "Unknown solver %(value)r, expected one of %(choices)s.",
                params={"value": self.solver, "choices": ", ".join(SOLVERS)},
                attr="solver",
            )


@dataclass
class SlabSystem:
    slab: Slab
    matrix: CsrMatrix
    rhs: StVector
    initial_trace: StVector
    solution: Optional[StVector] = None
    iterations: int = field(default=0)

    @property
    def n_dofs(self) -> int:
        return self.slab.n_dofs


def _as_trace(initial_trace, n_x: int) -> StVector:
    values = initial_trace.values if isinstance(initial_trace, StVector) else np.asarray(initial_trace, dtype=float)
    if values.shape != (n_x,):
        raise DimensionMismatchError(params={"expected": n_x, "actual": values.shape})
    return StVector(values, n_x)


def _local_block_indices(temporal: np.ndarray, n_x_cell: int) -> np.ndarray:
    return (temporal[:, None] * n_x_cell + np.arange(n_x_cell)[None, :]).ravel()


def _assemble_cells(slab: Slab, problem: HeatProblemData, trace: np.ndarray, cells: Sequence[int]):
    """
    Local contributions of `cells` in cell order: matrix blocks (rows, cols, block)
    and right-hand-side pieces (rows, values).
    """
    dof_handler, basis = slab.dof_handler, slab.basis
    fe = StFeValues(basis, dof_handler.element)
    jump = StJumpValues(basis, dof_handler.element)

    plus = basis.limit_left()
    minus = basis.limit_right()
    plus_t = nonzero_limit_indices(plus)
    minus_t = nonzero_limit_indices(minus)
    n_x_cell = dof_handler.dofs_per_cell
    plus_rows = _local_block_indices(plus_t, n_x_cell)
    minus_cols = _local_block_indices(minus_t, n_x_cell)
    plus_plus = np.outer(plus, plus)
    plus_minus = np.outer(plus[plus_t], minus[minus_t])

    matrix_blocks, rhs_blocks = [], []
    for cell in cells:
        fe.reinit_space(dof_handler, cell)
        jump.reinit_space(dof_handler, cell)
        mass_x = jump.local_mass()

        previous = None
        for m in range(slab.n_intervals):
            fe.reinit_time(slab, m)
            indices = get_local_dof_indices(slab, cell, m)
            phi, dts, grads, jxw = fe.shape_values, fe.shape_dts, fe.shape_space_grads, fe.JxW_values

            local = (phi.T * jxw) @ dts + np.einsum("q,qid,qjd->ij", jxw, grads, grads)
            # ([u], phi^+) at the start of the interval; the u^+ part is always present
            local += np.kron(plus_plus, mass_x)
            matrix_blocks.append((indices, indices, local))

            f = problem.rhs(fe.quadrature_points_time, fe.quadrature_points_space)
            rhs_blocks.append((indices, phi.T @ (jxw * f)))

            if previous is None:
                trace_local = trace[dof_handler.cell_dofs[cell]]
                rhs_blocks.append((indices, np.kron(plus, mass_x @ trace_local)))
            else:
                matrix_blocks.append((indices[plus_rows], previous[minus_cols], -np.kron(plus_minus, mass_x)))
            previous = indices
    return matrix_blocks, rhs_blocks


def assemble_slab(
        slab: Slab,
        problem: HeatProblemData,
        initial_trace,
        workers: int = 1,
) -> SlabSystem:
    """
    Slab matrix and right-hand side: time derivative and diffusion on every
    interval, jumps between the intervals of the slab and the initial trace
    entering through (u^+ - trace, phi^+) on the first interval.
    """
    trace = _as_trace(initial_trace, slab.n_x)
    matrix = CsrMatrix(slab.sparsity_pattern)
    rhs = np.zeros(slab.n_dofs)

    cells = np.arange(slab.dof_handler.mesh.n_cells)
    if workers > 1 and cells.size > 1:
        chunks = [chunk for chunk in np.array_split(cells, workers) if chunk.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            results = list(executor.map(lambda chunk: _assemble_cells(slab, problem, trace.values, chunk), chunks))
    else:
        results = [_assemble_cells(slab, problem, trace.values, cells)]

    # scatter in cell order so the result does not depend on the worker count
    for matrix_blocks, rhs_blocks in results:
        for rows, cols, block in matrix_blocks:
            matrix.add_entries(rows, cols, block)
        for rows, values in rhs_blocks:
            np.add.at(rhs, rows, values)

    return SlabSystem(slab=slab, matrix=matrix, rhs=StVector(rhs, slab.n_x), initial_trace=trace)


def apply_dirichlet(system: SlabSystem, slab: Slab, g) -> None:
    """
    Interpolates g at (node time, boundary support point) and eliminates those
    unknowns symmetrically: their columns move to the right-hand side, their rows
    become identity rows.
    """
    boundary = boundary_dofs(slab.dof_handler)
    if boundary.size == 0:
        return
    points = slab.dof_handler.support_points[boundary]
    times = slab.node_times()

    rows = (boundary[None, :] + slab.n_x * np.arange(slab.n_t)[:, None]).ravel()
    values = np.concatenate([
        np.broadcast_to(np.asarray(g(np.full(boundary.size, t), points), dtype=float), (boundary.size,))
        for t in times
    ])

    matrix, rhs = system.matrix, system.rhs.values
    lifted = np.zeros(slab.n_dofs)
    lifted[rows] = values
    rhs -= matrix.to_scipy() @ lifted

    constrained = np.zeros(slab.n_dofs, dtype=bool)
    constrained[rows] = True
    pattern = matrix.pattern
    matrix.values[constrained[pattern.row_indices] | constrained[pattern.indices]] = 0.0
    matrix.values[pattern.locate(rows, rows)] = 1.0
    rhs[rows] = values


def solve_slab_system(system: SlabSystem, options: SolverOptions = SolverOptions()) -> StVector:
    """
    Solves in place. GMRES/ILU(0) falls back to dense LU when it stalls on a
    system small enough for a dense factorisation.
    """
    index = system.slab.index
    if options.solver == "direct":
        x = solve_direct(system.matrix, system.rhs.values)
    else:
        result = solve_gmres_ilu0(system.matrix, system.rhs.values, options.rtol, options.max_iter, options.restart)
        system.iterations = result.iterations
        x = result.x
        if not result.converged:
            if system.n_dofs > DENSE_LU_LIMIT:
                raise SolverError(
                    "GMRES stalled on slab %(slab)s at relative residual %(residual).3e.",
                    params={"slab": index, "residual": result.relative_residual},
                    slab_index=index,
                    iterations=result.iterations,
                )
            logger.warning(
                "gmres stalled on slab %d (residual %.3e after %d iterations), falling back to dense LU",
                index, result.relative_residual, result.iterations,
            )
            x = solve_dense_lu(system.matrix, system.rhs.values)

    system.solution = StVector(x, system.slab.n_x)
    logger.debug("slab %d: n=%d iterations=%d", index, system.n_dofs, system.iterations)
    return system.solution


def extract_final_trace(slab: Slab, solution: StVector) -> StVector:
    """
    u^-(t_end) of the slab: right limits applied to the temporal blocks of its
    last interval.
    """
    n = slab.basis.n_dofs
    last = solution.blocks()[-n:]
    return StVector(slab.basis.limit_right() @ last, slab.n_x)


def march(
        tri: SpaceTimeTriangulation,
        problem: HeatProblemData,
        u0=None,
        options: SolverOptions = SolverOptions(),
) -> List[StVector]:
    """
    Forward solve over all slabs. u0 defaults to the nodal interpolant of the
    problem's initial value.
    """
    if u0 is None:
        u0 = problem.initial_value(tri.dof_handler.support_points)
    trace = _as_trace(u0, tri.n_x)

    solutions: List[Optional[StVector]] = [None] * len(tri)
    collection = TimeIteratorCollection()
    slabs = collection.add_iterator(tri)
    results = collection.add_iterator(solutions)

    while not collection.at_end():
        slab = slabs.value
        try:
            system = assemble_slab(slab, problem, trace, workers=options.workers)
            apply_dirichlet(system, slab, problem.boundary_value)
            results.value = solve_slab_system(system, options)
        except SolverError as exc:
            if exc.slab_index is None:
                exc.slab_index = slab.index
            raise
        trace = extract_final_trace(slab, results.value)
        collection.increment()
    return results.items


def _check_solutions(tri: SpaceTimeTriangulation, solutions: Sequence[StVector]) -> None:
    if len(solutions) != len(tri):
        raise DimensionMismatchError(params={"expected": len(tri), "actual": len(solutions)})
    for slab, solution in zip(tri, solutions):
        if len(solution) != slab.n_dofs:
            raise DimensionMismatchError(params={"expected": slab.n_dofs, "actual": len(solution)})


def l2_l2_error(tri: SpaceTimeTriangulation, solutions: Sequence[StVector], solution: ManufacturedSolution) -> float:
    """
    || u_kh - u ||_{L2(I, L2(Omega))} with one quadrature order above assembly.
    """
    _check_solutions(tri, solutions)
    fe = StFeValues(tri.basis, tri.dof_handler.element, tri.basis.degree + 3, tri.dof_handler.element.degree + 3)
    total = 0.0
    for slab, u in zip(tri, solutions):
        for cell in range(slab.dof_handler.mesh.n_cells):
            fe.reinit_space(slab.dof_handler, cell)
            for m in range(slab.n_intervals):
                fe.reinit_time(slab, m)
                exact = solution.value(fe.quadrature_points_time, fe.quadrature_points_space)
                diff = fe.get_function_values(u) - exact
                total += float(np.dot(diff ** 2, fe.JxW_values))
    return float(np.sqrt(total))


def eoc(errors: Sequence[float], mesh_sizes: Sequence[float]) -> List[float]:
    """
    Experimental orders log(e_{i-1} / e_i) / log(h_{i-1} / h_i) for i >= 1.
    """
    errors = np.asarray(errors, dtype=float)
    mesh_sizes = np.asarray(mesh_sizes, dtype=float)
    if errors.shape != mesh_sizes.shape or errors.size < 2:
        raise DimensionMismatchError(
            "Need at least two errors with matching mesh sizes, got %(actual)s.",
            params={"expected": mesh_sizes.size, "actual": errors.size},
        )
    if np.any(errors <= 0.0) or np.any(mesh_sizes <= 0.0):
        raise ConfigurationError("Errors and mesh sizes must be positive.", code="not_positive", attr="errors")
    return (np.log(errors[:-1] / errors[1:]) / np.log(mesh_sizes[:-1] / mesh_sizes[1:])).tolist()


def evaluate_at_time(tri: SpaceTimeTriangulation, solutions: Sequence[StVector], t: float) -> np.ndarray:
    """
    Nodal values of u_kh(t). At an interval end the left limit is returned,
    at t = 0 the right limit of the first interval.
    """
    _check_solutions(tri, solutions)
    mesh = tri.temporal_mesh
    if not 0.0 <= t <= mesh.end_time:
        raise ConfigurationError(
            "Time %(value)s lies outside [0, %(end)s].", params={"value": t, "end": mesh.end_time}, attr="t"
        )
    interval = max(int(np.searchsorted(mesh.breaks, t, side="left")) - 1, 0)
    for slab, u in zip(tri, solutions):
        if interval in slab.intervals:
            m = slab.intervals.index(interval)
            t0, t1 = slab.interval_bounds(m)
            n = slab.basis.n_dofs
            blocks = u.blocks()[slab.temporal_offset(m):slab.temporal_offset(m) + n]
            return slab.basis.shape_values((t - t0) / (t1 - t0))[0] @ blocks
    raise DimensionMismatchError(params={"expected": interval, "actual": None})
