"""
Uniform hypercube meshes of (0, 1)^dim, Q_s Lagrange elements and the spatial
DoF handling shared by every slab.
"""
import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_legendre

from .exceptions import (
    ConfigurationError,
    DegenerateCellError,
    DimensionMismatchError,
    DoFIndexError,
    UnsupportedDegreeError,
)
from .linalg import SparsityPattern
from .polynomials import barycentric_weights, lagrange_derivatives, lagrange_values

SUPPORTED_DIMS = (1, 2)
MAX_SPATIAL_DEGREE = 4


def _check_dim(dim: int) -> None:
    if dim not in SUPPORTED_DIMS:
        raise UnsupportedDegreeError(
            "Spatial dimension %(degree)s is outside [%(low)s, %(high)s].",
            code="unsupported_dimension",
            params={"degree": dim, "low": SUPPORTED_DIMS[0], "high": SUPPORTED_DIMS[-1]},
            attr="dim",
        )


def _lattice(n: int, dim: int) -> np.ndarray:
    # all integer points of {0..n-1}^dim, first coordinate running fastest
    return np.array([p[::-1] for p in itertools.product(range(n), repeat=dim)], dtype=int).reshape(-1, dim)


@dataclass(frozen=True)
class SpatialMesh:
    """
    Uniform mesh of (2**level)**dim axis-aligned cells. Cells and vertices are
    numbered lexicographically with the first coordinate running fastest.
    """

    dim: int
    level: int

    @property
    def n_cells_per_dim(self) -> int:
        return 2 ** self.level

    @property
    def n_cells(self) -> int:
        return self.n_cells_per_dim ** self.dim

    @property
    def cell_size(self) -> float:
        return 1.0 / self.n_cells_per_dim

    @property
    def cells(self) -> np.ndarray:
        return _lattice(self.n_cells_per_dim, self.dim)

    @property
    def vertices(self) -> np.ndarray:
        return _lattice(self.n_cells_per_dim + 1, self.dim) * self.cell_size

    def cell_coordinates(self, cell: int) -> np.ndarray:
        if not 0 <= cell < self.n_cells:
            raise DoFIndexError(params={"index": cell, "size": self.n_cells})
        n = self.n_cells_per_dim
        return np.array([(cell // n ** d) % n for d in range(self.dim)])

    def cell_bounds(self, cell: int) -> Tuple[np.ndarray, np.ndarray]:
        lower = self.cell_coordinates(cell) * self.cell_size
        return lower, lower + self.cell_size

    def boundary_faces(self, cell: int) -> np.ndarray:
        """
        Boolean flag per face, ordered (x-, x+, y-, y+).
        """
        coords = self.cell_coordinates(cell)
        last = self.n_cells_per_dim - 1
        return np.array([flag for c in coords for flag in (c == 0, c == last)])

    def neighbor(self, cell: int, face: int) -> Optional[int]:
        if self.boundary_faces(cell)[face]:
            return None
        direction, side = divmod(face, 2)
        return cell + (1 if side else -1) * self.n_cells_per_dim ** direction


def make_hypercube_mesh(dim: int, n_refinements: int) -> SpatialMesh:
    _check_dim(dim)
    if n_refinements < 0:
        raise ConfigurationError(
            "Number of refinements must be non-negative, got %(value)s.",
            params={"value": n_refinements},
            attr="n_refinements",
        )
    return SpatialMesh(dim=dim, level=n_refinements)


def refine_uniform(mesh: SpatialMesh) -> SpatialMesh:
    return SpatialMesh(dim=mesh.dim, level=mesh.level + 1)


def cell_jacobian(mesh: SpatialMesh, cell: int) -> Tuple[float, np.ndarray]:
    """
    Affine map data of an axis-aligned cell: det J and the diagonal of J^{-T}.
    """
    lower, upper = mesh.cell_bounds(cell)
    return affine_cell_map(lower, upper, cell)


def affine_cell_map(lower, upper, cell=None) -> Tuple[float, np.ndarray]:
    h = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    if np.any(h <= 0.0):
        raise DegenerateCellError(params={"cell": cell if cell is not None else tuple(lower)})
    return float(np.prod(h)), 1.0 / h


@dataclass(frozen=True)
class SpatialQuadrature:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


def make_spatial_quadrature(n_points_1d: int, dim: int) -> SpatialQuadrature:
    """
    Tensor Gauss rule on the reference cell [0, 1]^dim, first coordinate fastest.
    """
    x, w = roots_legendre(n_points_1d)
    x, w = (x + 1.0) / 2.0, w / 2.0
    index = _lattice(n_points_1d, dim)
    return SpatialQuadrature(points=x[index], weights=np.prod(w[index], axis=1))


class QLagrangeElement:
    """
    Tensor-product Lagrange element of degree s with equispaced nodes. Local
    index a = a_x + (s + 1) * a_y.
    """

    def __init__(self, degree: int, dim: int):
        _check_dim(dim)
        if isinstance(degree, bool) or not 1 <= degree <= MAX_SPATIAL_DEGREE:
            raise UnsupportedDegreeError(params={"degree": degree, "low": 1, "high": MAX_SPATIAL_DEGREE}, attr="s")
        self.degree = degree
        self.dim = dim
        self.nodes_1d = np.linspace(0.0, 1.0, degree + 1)
        self._weights_1d = barycentric_weights(self.nodes_1d)
        self.node_index = _lattice(degree + 1, dim)

    def __repr__(self):
        return "QLagrangeElement(degree=%d, dim=%d)" % (self.degree, self.dim)

    @property
    def n_dofs(self) -> int:
        return (self.degree + 1) ** self.dim

    @property
    def reference_nodes(self) -> np.ndarray:
        return self.nodes_1d[self.node_index]

    def face_dofs(self, face: int) -> np.ndarray:
        direction, side = divmod(face, 2)
        position = self.degree if side else 0
        return np.flatnonzero(self.node_index[:, direction] == position)

    def _tables_1d(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = [lagrange_values(self.nodes_1d, self._weights_1d, points[:, d]) for d in range(self.dim)]
        derivs = [lagrange_derivatives(self.nodes_1d, self._weights_1d, points[:, d]) for d in range(self.dim)]
        return values, derivs

    def shape_values(self, points) -> np.ndarray:
        """
        Values of all shape functions at reference points, shape (n_points, n_dofs).
        """
        values, _ = self._tables_1d(points)
        out = np.ones((values[0].shape[0], self.n_dofs))
        for d in range(self.dim):
            out *= values[d][:, self.node_index[:, d]]
        return out

    def shape_grads(self, points) -> np.ndarray:
        """
        Reference gradients, shape (n_points, n_dofs, dim).
        """
        values, derivs = self._tables_1d(points)
        out = np.ones((values[0].shape[0], self.n_dofs, self.dim))
        for component in range(self.dim):
            for d in range(self.dim):
                table = derivs[d] if d == component else values[d]
                out[:, :, component] *= table[:, self.node_index[:, d]]
        return out

    def _check_index(self, a: int) -> None:
        if not 0 <= a < self.n_dofs:
            raise DoFIndexError(params={"index": a, "size": self.n_dofs})

    def shape_value(self, a: int, point) -> float:
        self._check_index(a)
        return float(self.shape_values(np.reshape(point, (1, self.dim)))[0, a])

    def shape_grad(self, a: int, point) -> np.ndarray:
        self._check_index(a)
        return self.shape_grads(np.reshape(point, (1, self.dim)))[0, a]


class SpatialDoFHandler:
    """
    Continuous Q_s numbering on a uniform mesh. Global DoFs sit on the lattice
    of (s * n + 1)**dim nodes, first coordinate fastest, so neighbouring cells
    share the DoFs of their common face.
    """

    def __init__(self, mesh: SpatialMesh, element: QLagrangeElement):
        if mesh.dim != element.dim:
            raise DimensionMismatchError(params={"expected": mesh.dim, "actual": element.dim}, attr="dim")
        self.mesh = mesh
        self.element = element
        self.n_nodes_1d = element.degree * mesh.n_cells_per_dim + 1

        lattice = mesh.cells[:, None, :] * element.degree + element.node_index[None, :, :]
        strides = self.n_nodes_1d ** np.arange(mesh.dim)
        self.cell_dofs = lattice @ strides
        self.cell_dofs.setflags(write=False)

    def __repr__(self):
        return "SpatialDoFHandler(n_dofs=%d, %r)" % (self.n_dofs, self.element)

    @property
    def n_dofs(self) -> int:
        return self.n_nodes_1d ** self.mesh.dim

    @property
    def dofs_per_cell(self) -> int:
        return self.element.n_dofs

    @property
    def support_points(self) -> np.ndarray:
        return _lattice(self.n_nodes_1d, self.mesh.dim) / (self.n_nodes_1d - 1)

    def interpolate(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.asarray(func(self.support_points), dtype=float).reshape(self.n_dofs)


def build_spatial_sparsity(dof: SpatialDoFHandler) -> SparsityPattern:
    n_local = dof.dofs_per_cell
    rows = np.repeat(dof.cell_dofs, n_local, axis=1).ravel()
    cols = np.tile(dof.cell_dofs, (1, n_local)).ravel()
    return SparsityPattern.from_pairs(rows, cols, (dof.n_dofs, dof.n_dofs))


def boundary_dofs(dof: SpatialDoFHandler) -> np.ndarray:
    found = set()
    for cell in range(dof.mesh.n_cells):
        for face, at_boundary in enumerate(dof.mesh.boundary_faces(cell)):
            if at_boundary:
                found.update(dof.cell_dofs[cell, dof.element.face_dofs(face)].tolist())
    return np.array(sorted(found), dtype=int)


def assemble_spatial_matrices(dof: SpatialDoFHandler, n_points_1d: Optional[int] = None) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """
    Mass and unit-Laplacian stiffness matrices of the Q_s space.
    """
    quadrature = make_spatial_quadrature(n_points_1d or dof.element.degree + 2, dof.mesh.dim)
    phi = dof.element.shape_values(quadrature.points)
    grad = dof.element.shape_grads(quadrature.points)

    rows, cols, mass, stiffness = [], [], [], []
    n_local = dof.dofs_per_cell
    for cell in range(dof.mesh.n_cells):
        det_j, inv_h = cell_jacobian(dof.mesh, cell)
        jxw = quadrature.weights * det_j
        cell_grad = grad * inv_h
        mass.append(((phi.T * jxw) @ phi).ravel())
        stiffness.append(np.einsum("q,qid,qjd->ij", jxw, cell_grad, cell_grad).ravel())
        rows.append(np.repeat(dof.cell_dofs[cell], n_local))
        cols.append(np.tile(dof.cell_dofs[cell], n_local))

    rows, cols = np.concatenate(rows), np.concatenate(cols)
    shape = (dof.n_dofs, dof.n_dofs)
    mass_matrix = sp.csr_matrix((np.concatenate(mass), (rows, cols)), shape=shape)
    stiffness_matrix = sp.csr_matrix((np.concatenate(stiffness), (rows, cols)), shape=shape)
    return mass_matrix, stiffness_matrix
