import logging

import numpy as np
import pytest
import scipy.sparse.linalg

from lib_spacetime_dg import heat_problem
from lib_spacetime_dg.exceptions import ConfigurationError, DimensionMismatchError, SolverError
from lib_spacetime_dg.heat_problem import (
    ConstantSolution,
    MovingPeakSolution,
    HeatProblemData,
    ManufacturedSolution,
    SolverOptions,
    apply_dirichlet,
    assemble_slab,
    eoc,
    evaluate_at_time,
    extract_final_trace,
    l2_l2_error,
    march,
    solve_slab_system,
)
from lib_spacetime_dg.linalg import SolveResult, StVector, residual_norm
from lib_spacetime_dg.spatial_fe import assemble_spatial_matrices, boundary_dofs
from tests.conftest import SUPPORT_TYPES, make_triangulation

DIRECT = SolverOptions(solver="direct")


class TimeTimesX(ManufacturedSolution):
    """u = t * x_1, contained in every space with r, s >= 1."""

    def value(self, t, x):
        return np.asarray(t) * np.atleast_2d(x)[:, 0]

    def time_derivative(self, t, x):
        return np.atleast_2d(x)[:, 0]

    def gradient(self, t, x):
        x = np.atleast_2d(x)
        grad = np.zeros_like(x)
        grad[:, 0] = t
        return grad

    def laplacian(self, t, x):
        return np.zeros(np.atleast_2d(x).shape[0])


class PiecewiseConstantLoad(HeatProblemData):
    """Zero boundary data, a sine bump initially and a load constant on each interval."""

    def __init__(self, n_intervals):
        self.n_intervals = n_intervals

    def level(self, t):
        return 1.0 + np.floor(np.asarray(t) * self.n_intervals) % 3

    def rhs(self, t, x):
        return self.level(t) * np.ones(np.atleast_2d(x).shape[0])

    def boundary_value(self, t, x):
        return np.zeros(np.atleast_2d(x).shape[0])

    def initial_value(self, x):
        x = np.atleast_2d(x)
        return np.prod(np.sin(np.pi * x), axis=1)


def _slab_values(solutions):
    return np.concatenate([u.values for u in solutions])


def test_moving_peak_formulas_match_finite_differences(rng):
    solution = MovingPeakSolution(2)
    t = rng.random(1000)
    x = rng.random((1000, 2))
    eps = 1e-6

    dt = (solution.value(t + eps, x) - solution.value(t - eps, x)) / (2 * eps)
    np.testing.assert_allclose(solution.time_derivative(t, x), dt, rtol=1e-5, atol=1e-4)

    laplacian = np.zeros(1000)
    h = 1e-4
    for d in range(2):
        shift = np.zeros(2)
        shift[d] = eps
        gradient = (solution.value(t, x + shift) - solution.value(t, x - shift)) / (2 * eps)
        np.testing.assert_allclose(solution.gradient(t, x)[:, d], gradient, rtol=1e-5, atol=1e-4)
        shift[d] = h
        laplacian += (solution.value(t, x + shift) - 2 * solution.value(t, x) + solution.value(t, x - shift)) / h ** 2
    np.testing.assert_allclose(solution.laplacian(t, x), laplacian, rtol=1e-4, atol=1e-2)

    residual = solution.rhs(t, x) + solution.laplacian(t, x) - solution.time_derivative(t, x)
    np.testing.assert_allclose(residual, 0.0, atol=1e-9)


def test_moving_peak_peak_and_one_dimensional_variant():
    solution = MovingPeakSolution(2)
    assert solution.value(0.0, [[0.75, 0.5]])[0] == pytest.approx(1.0)
    assert solution.value(0.25, [[0.5, 0.75]])[0] == pytest.approx(1.0)
    line = MovingPeakSolution(1)
    assert line.value(0.0, [[0.75]])[0] == pytest.approx(1.0)
    assert line.laplacian(0.0, [[0.75]])[0] == pytest.approx(-2 * 50.0)
    with pytest.raises(ConfigurationError):
        MovingPeakSolution(3)


def test_homogeneous_problem_has_zero_solution():
    tri = make_triangulation(level=1, r=1, n_intervals=2)
    slab = tri.first
    system = assemble_slab(slab, ConstantSolution(0.0), np.zeros(slab.n_x))
    np.testing.assert_array_equal(system.rhs.values, 0.0)
    apply_dirichlet(system, slab, ConstantSolution(0.0).boundary_value)
    np.testing.assert_allclose(solve_slab_system(system).values, 0.0)


@pytest.mark.parametrize("support_type", SUPPORT_TYPES)
def test_degree_zero_single_interval_is_backward_euler(support_type):
    tri = make_triangulation(level=2, r=0, n_intervals=1, end_time=0.25, support_type=support_type)
    slab = tri.first
    k = 0.25
    mass, stiffness = assemble_spatial_matrices(slab.dof_handler)
    trace = np.linspace(0.0, 1.0, slab.n_x)
    load = PiecewiseConstantLoad(4)

    system = assemble_slab(slab, load, trace)
    np.testing.assert_allclose(system.matrix.to_dense(), (mass + k * stiffness).toarray(), atol=1e-12)
    expected_rhs = mass @ trace + k * (mass @ np.ones(slab.n_x)) * load.level(0.1)
    np.testing.assert_allclose(system.rhs.values, expected_rhs, atol=1e-12)


def _implicit_euler(dof_handler, load, u0, end_time, n_steps):
    mass, stiffness = assemble_spatial_matrices(dof_handler)
    k = end_time / n_steps
    interior = np.setdiff1d(np.arange(dof_handler.n_dofs), boundary_dofs(dof_handler))
    system = (mass + k * stiffness).tocsc()[interior][:, interior]
    u = u0.copy()
    u[boundary_dofs(dof_handler)] = 0.0
    states = []
    for step in range(n_steps):
        rhs = mass @ u + k * load.level((step + 0.5) * k) * (mass @ np.ones(dof_handler.n_dofs))
        u = np.zeros(dof_handler.n_dofs)
        u[interior] = scipy.sparse.linalg.spsolve(system, rhs[interior])
        states.append(u)
    return states


@pytest.mark.parametrize("n_max", [0, 1])
def test_degree_zero_matches_implicit_euler(n_max):
    n_steps = 16
    tri = make_triangulation(level=3, r=0, s=1, n_intervals=n_steps, n_max=n_max)
    load = PiecewiseConstantLoad(n_steps)
    u0 = load.initial_value(tri.dof_handler.support_points)

    solutions = march(tri, load, u0, options=DIRECT)
    dg_states = _slab_values(solutions).reshape(n_steps, tri.n_x)
    oracle = np.array(_implicit_euler(tri.dof_handler, load, u0, 1.0, n_steps))
    np.testing.assert_allclose(dg_states, oracle, atol=1e-10)


@pytest.mark.parametrize("support_type", SUPPORT_TYPES)
@pytest.mark.parametrize("r", [1, 2])
def test_constant_solution_is_reproduced(support_type, r):
    tri = make_triangulation(level=2, r=r, s=1, n_intervals=3, n_max=2, support_type=support_type)
    solutions = march(tri, ConstantSolution(2.5), options=DIRECT)
    np.testing.assert_allclose(_slab_values(solutions), 2.5, atol=1e-10)


@pytest.mark.parametrize("support_type", SUPPORT_TYPES)
def test_solution_in_discrete_space_is_exact(support_type):
    tri = make_triangulation(level=1, r=1, s=1, n_intervals=2, support_type=support_type)
    solution = TimeTimesX()
    solutions = march(tri, solution)
    assert l2_l2_error(tri, solutions, solution) <= 1e-10


def test_error_of_zero_against_one_is_measure():
    tri = make_triangulation(level=1, r=1, n_intervals=2, n_max=1)
    zeros = [StVector.zeros(slab.n_x, slab.n_t) for slab in tri]
    assert l2_l2_error(tri, zeros, ConstantSolution(1.0)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DimensionMismatchError):
        l2_l2_error(tri, zeros[:1], ConstantSolution(1.0))


def test_slab_size_does_not_change_the_solution():
    solution = MovingPeakSolution(2)
    reference = None
    for n_max in (0, 1, 2, 4):
        tri = make_triangulation(level=3, r=1, s=1, n_intervals=8, n_max=n_max)
        values = _slab_values(march(tri, solution))
        if reference is None:
            reference = values
        else:
            np.testing.assert_allclose(values, reference, atol=1e-8, rtol=0.0)


def test_dirichlet_rows_and_residual():
    tri = make_triangulation(level=2, r=1, s=2, n_intervals=2, support_type="radau-right")
    slab = tri.first
    solution = MovingPeakSolution(2)
    system = assemble_slab(slab, solution, solution.initial_value(slab.dof_handler.support_points))
    apply_dirichlet(system, slab, solution.boundary_value)
    options = SolverOptions(rtol=1e-12)
    u = solve_slab_system(system, options)

    assert residual_norm(system.matrix, u.values, system.rhs.values) <= 1e-12 * np.linalg.norm(system.rhs.values) * 1.01
    boundary = boundary_dofs(slab.dof_handler)
    points = slab.dof_handler.support_points[boundary]
    for i_t, t in enumerate(slab.node_times()):
        expected = solution.value(np.full(boundary.size, t), points)
        np.testing.assert_allclose(u.block(i_t)[boundary], expected, atol=1e-10)


def test_dirichlet_with_zero_data_gives_identity_rows():
    slab = make_triangulation(level=1, r=1, n_intervals=1).first
    system = assemble_slab(slab, MovingPeakSolution(2), np.ones(slab.n_x))
    apply_dirichlet(system, slab, lambda t, x: np.zeros(x.shape[0]))
    dense = system.matrix.to_dense()
    rows = (boundary_dofs(slab.dof_handler)[None, :] + slab.n_x * np.arange(slab.n_t)[:, None]).ravel()
    np.testing.assert_array_equal(dense[rows], np.eye(slab.n_dofs)[rows])
    np.testing.assert_array_equal(system.rhs.values[rows], 0.0)
    # symmetric elimination clears the columns as well
    others = np.setdiff1d(np.arange(slab.n_dofs), rows)
    np.testing.assert_array_equal(dense[np.ix_(others, rows)], 0.0)


def test_node_times_of_legendre_lie_inside_intervals():
    slab = make_triangulation(r=1, n_intervals=2, support_type="legendre").first
    times = slab.node_times().reshape(2, 2)
    assert np.all((times[0] > 0.0) & (times[0] < 0.5))
    assert np.all((times[1] > 0.5) & (times[1] < 1.0))


def test_parallel_assembly_is_identical_to_serial():
    slab = make_triangulation(level=2, r=1, s=2, n_intervals=3).first
    solution = MovingPeakSolution(2)
    trace = solution.initial_value(slab.dof_handler.support_points)
    serial = assemble_slab(slab, solution, trace)
    threaded = assemble_slab(slab, solution, trace, workers=3)
    np.testing.assert_array_equal(serial.matrix.values, threaded.matrix.values)
    np.testing.assert_array_equal(serial.rhs.values, threaded.rhs.values)


def test_final_trace():
    slab = make_triangulation(level=0, r=1, n_intervals=2).first
    values = np.arange(slab.n_dofs, dtype=float)
    trace = extract_final_trace(slab, StVector(values, slab.n_x))
    np.testing.assert_allclose(trace.values, values[-slab.n_x:], atol=1e-14)

    constant = make_triangulation(level=0, r=0, n_intervals=3).first
    values = np.arange(constant.n_dofs, dtype=float)
    np.testing.assert_allclose(extract_final_trace(constant, StVector(values, constant.n_x)).values,
                               values[-constant.n_x:])

    radau = make_triangulation(level=0, r=1, n_intervals=1, support_type="radau-left").first
    a, b = np.arange(4.0), 10.0 + np.arange(4.0)
    trace = extract_final_trace(radau, StVector(np.concatenate([a, b]), radau.n_x))
    np.testing.assert_allclose(trace.values, -a / 2 + 3 * b / 2, atol=1e-12)


def test_evaluate_at_time():
    tri = make_triangulation(level=1, r=1, n_intervals=4, n_max=3)
    solution = TimeTimesX()
    solutions = march(tri, solution, options=DIRECT)
    x = tri.dof_handler.support_points
    for t in (0.0, 0.3, 0.5, 0.8, 1.0):
        np.testing.assert_allclose(evaluate_at_time(tri, solutions, t), t * x[:, 0], atol=1e-10)
    with pytest.raises(ConfigurationError):
        evaluate_at_time(tri, solutions, 1.5)


def test_error_decreases_under_kh_refinement():
    solution = MovingPeakSolution(2)
    errors = []
    for level, n_intervals in ((2, 4), (3, 8)):
        tri = make_triangulation(level=level, r=1, s=1, n_intervals=n_intervals, n_max=1)
        errors.append(l2_l2_error(tri, march(tri, solution, options=DIRECT), solution))
    assert errors[1] < errors[0]


def test_eoc():
    assert eoc([1.0, 0.25], [1.0, 0.5]) == pytest.approx([2.0])
    assert eoc([0.3, 0.3], [0.2, 0.1]) == pytest.approx([0.0])
    assert eoc([1.0, 0.125, 0.125 / 8], [1.0, 0.5, 0.25]) == pytest.approx([3.0, 3.0])
    with pytest.raises(ConfigurationError):
        eoc([1.0, 0.0], [1.0, 0.5])
    with pytest.raises(DimensionMismatchError):
        eoc([1.0], [1.0])


def test_gmres_stall_falls_back_to_dense_lu(caplog):
    slab = make_triangulation(level=2, r=1, s=1, n_intervals=2).first
    solution = MovingPeakSolution(2)
    trace = solution.initial_value(slab.dof_handler.support_points)

    reference = assemble_slab(slab, solution, trace)
    apply_dirichlet(reference, slab, solution.boundary_value)
    expected = solve_slab_system(reference, DIRECT).values

    system = assemble_slab(slab, solution, trace)
    apply_dirichlet(system, slab, solution.boundary_value)
    with caplog.at_level(logging.WARNING, logger="lib_spacetime_dg.heat_problem"):
        u = solve_slab_system(system, SolverOptions(rtol=1e-15, max_iter=1, restart=1))
    assert "falling back to dense LU" in caplog.text
    np.testing.assert_allclose(u.values, expected, atol=1e-10)


def test_solver_failure_carries_slab_index(monkeypatch):
    calls = []
    gmres = heat_problem.solve_gmres_ilu0

    def stall_on_second_slab(matrix, rhs, *args):
        calls.append(matrix.shape[0])
        if len(calls) == 1:
            return gmres(matrix, rhs, *args)
        return SolveResult(np.zeros(matrix.shape[0]), 7, False, 1.0)

    monkeypatch.setattr(heat_problem, "solve_gmres_ilu0", stall_on_second_slab)
    monkeypatch.setattr(heat_problem, "DENSE_LU_LIMIT", 0)
    tri = make_triangulation(level=1, r=1, n_intervals=2, n_max=1)
    with pytest.raises(SolverError) as info:
        march(tri, MovingPeakSolution(2))
    assert len(calls) == 2
    assert info.value.slab_index == 1
    assert info.value.iterations == 7
    assert info.value.exit_code == 1
    assert "slab 1" in str(info.value)


def test_unknown_solver_is_rejected():
    with pytest.raises(ConfigurationError):
        SolverOptions(solver="cg")
