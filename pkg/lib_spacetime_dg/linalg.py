"""
Sparse storage and solvers for slab systems.

Matrices are bound to an explicit SparsityPattern; scattering outside the
pattern raises instead of silently growing the matrix.
"""
import logging
import math
from pathlib import Path
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, spsolve, spsolve_triangular

from .exceptions import (
    DimensionMismatchError,
    OutputError,
    PatternViolationError,
    SingularMatrixError,
    SolverError,
)

logger = logging.getLogger(__name__)

DENSE_LU_LIMIT = 5000
DEFAULT_RTOL = 1e-12
DEFAULT_MAX_ITER = 5000
DEFAULT_RESTART = 50


class SparsityPattern:
    """
    CSR index structure: sorted, unique column indices per row.
    """

    def __init__(self, indptr, indices, shape: Tuple[int, int]):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.shape = (int(shape[0]), int(shape[1]))
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        self._keys = None

    @classmethod
    def from_pairs(cls, rows, cols, shape: Tuple[int, int]) -> "SparsityPattern":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        marker = sp.csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=shape)
        marker.sum_duplicates()
        marker.sort_indices()
        return cls(marker.indptr, marker.indices, shape)

    @classmethod
    def from_scipy(cls, matrix) -> "SparsityPattern":
        matrix = sp.csr_matrix(matrix)
        matrix.sum_duplicates()
        matrix.sort_indices()
        return cls(matrix.indptr, matrix.indices, matrix.shape)

    def __repr__(self):
        return "SparsityPattern(shape=%r, nnz=%d)" % (self.shape, self.nnz)

    def __eq__(self, other):
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    @property
    def n_cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.indptr))

    def keys(self) -> np.ndarray:
        # row-major linear keys, sorted because rows and columns are sorted
        if self._keys is None:
            self._keys = self.row_indices * self.n_cols + self.indices
        return self._keys

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def pairs(self) -> set:
        return set(zip(self.row_indices.tolist(), self.indices.tolist()))

    def locate(self, rows, cols) -> np.ndarray:
        """
        Positions of (rows[k], cols[k]) in the index array; raises if any pair is absent.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        out_of_range = (rows < 0) | (rows >= self.n_rows) | (cols < 0) | (cols >= self.n_cols)
        if np.any(out_of_range):
            k = int(np.flatnonzero(out_of_range)[0])
            raise PatternViolationError(params={"row": int(rows[k]), "col": int(cols[k])})
        keys = self.keys()
        query = rows * self.n_cols + cols
        positions = np.searchsorted(keys, query)
        clipped = np.minimum(positions, keys.size - 1)
        missing = (positions >= keys.size) | (keys[clipped] != query)
        if np.any(missing):
            k = int(np.flatnonzero(missing)[0])
            raise PatternViolationError(params={"row": int(rows[k]), "col": int(cols[k])})
        return positions

    def to_scipy(self, dtype=bool) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.nnz, dtype=dtype), self.indices, self.indptr), shape=self.shape)

    def is_subset_of(self, other: "SparsityPattern") -> bool:
        return self.shape == other.shape and bool(np.all(np.isin(self.keys(), other.keys())))


class CsrMatrix:
    """
    Real matrix whose value array is aligned with a fixed SparsityPattern.
    """

    def __init__(self, pattern: SparsityPattern, values: Optional[np.ndarray] = None):
        self.pattern = pattern
        if values is None:
            values = np.zeros(pattern.nnz)
        elif values.size != pattern.nnz:
            raise DimensionMismatchError(params={"expected": pattern.nnz, "actual": values.size})
        self.values = values

    def __repr__(self):
        return "CsrMatrix(shape=%r, nnz=%d)" % (self.shape, self.nnz)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pattern.shape

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    def add_entry(self, i: int, j: int, value: float) -> None:
        self.values[self.pattern.locate([i], [j])[0]] += value

    def add_entries(self, rows, cols, values) -> None:
        """
        Accumulates a dense local block (or matching flat triplets).
        """
        values = np.asarray(values, dtype=float)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if values.ndim == 2:
            rows, cols = np.repeat(rows, cols.size), np.tile(cols, rows.size)
        np.add.at(self.values, self.pattern.locate(rows, cols), values.ravel())

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.pattern.indices, self.pattern.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def add_entry(matrix: CsrMatrix, i: int, j: int, value: float) -> None:
    matrix.add_entry(i, j, value)


def spmv(matrix: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.shape[1],):
        raise DimensionMismatchError(params={"expected": matrix.shape[1], "actual": x.shape})
    return matrix.to_scipy() @ x


class StVector:
    """
    Space-time coefficient vector in space-major order: entry i_x + n_x * i_t.
    """

    def __init__(self, values, n_x: int):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or n_x <= 0 or values.size % n_x:
            raise DimensionMismatchError(
                "Vector of size %(actual)s does not split into blocks of %(expected)s.",
                params={"expected": n_x, "actual": values.size},
            )
        self.values = values
        self.n_x = n_x

    @classmethod
    def zeros(cls, n_x: int, n_t: int = 1) -> "StVector":
        return cls(np.zeros(n_x * n_t), n_x)

    def __repr__(self):
        return "StVector(n_x=%d, n_t=%d)" % (self.n_x, self.n_t)

    def __len__(self):
        return self.values.size

    @property
    def n_t(self) -> int:
        return self.values.size // self.n_x

    def blocks(self) -> np.ndarray:
        return self.values.reshape(self.n_t, self.n_x)

    def block(self, i_t: int) -> np.ndarray:
        return self.blocks()[i_t]


class SolveResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    relative_residual: float


class ILU0:
    """
    Incomplete LU factorisation without fill: L and U live on the pattern of A.
    """

    def __init__(self, matrix: Union[CsrMatrix, sp.spmatrix]):
        A = matrix.to_scipy() if isinstance(matrix, CsrMatrix) else sp.csr_matrix(matrix)
        A = A.copy()
        A.sum_duplicates()
        A.sort_indices()
        n = A.shape[0]
        indptr, indices, data = A.indptr, A.indices, A.data.astype(float)

        diag_pos = np.empty(n, dtype=np.int64)
        for i in range(n):
            row = indices[indptr[i]:indptr[i + 1]]
            k = np.searchsorted(row, i)
            if k >= row.size or row[k] != i:
                raise SolverError(
                    "Row %(row)s has no diagonal entry in the pattern.",
                    code="missing_diagonal",
                    params={"row": i},
                )
            diag_pos[i] = indptr[i] + k

        for i in range(n):
            start, end = indptr[i], indptr[i + 1]
            cols_i = indices[start:end]
            for pos in range(start, diag_pos[i]):
                k = indices[pos]
                pivot = data[diag_pos[k]]
                if pivot == 0.0:
                    raise SolverError("Zero pivot in ILU(0) at row %(row)s.", code="breakdown", params={"row": k})
                data[pos] /= pivot
                upper = slice(diag_pos[k] + 1, indptr[k + 1])
                cols_k = indices[upper]
                loc = np.searchsorted(cols_i, cols_k)
                hit = loc < cols_i.size
                hit[hit] = cols_i[loc[hit]] == cols_k[hit]
                data[start + loc[hit]] -= data[pos] * data[upper][hit]

        factors = sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=A.shape)
        self.L = (sp.tril(factors, k=-1) + sp.identity(n)).tocsr()
        self.U = sp.triu(factors, k=0).tocsr()
        if np.any(self.U.diagonal() == 0.0):
            raise SolverError("Zero pivot in ILU(0).", code="breakdown")
        self.shape = A.shape

    def solve(self, b) -> np.ndarray:
        y = spsolve_triangular(self.L, b, lower=True, unit_diagonal=True)
        return spsolve_triangular(self.U, y, lower=False)

    def as_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.solve, dtype=float)


def solve_gmres_ilu0(
        matrix: CsrMatrix,
        rhs,
        rtol: float = DEFAULT_RTOL,
        max_iter: int = DEFAULT_MAX_ITER,
        restart: int = DEFAULT_RESTART,
) -> "SolveResult":
    """
    Restarted GMRES, left-preconditioned with ILU(0).

    Convergence means
    ||b - A x||_2 <= rtol * ||b||_2. Non-convergence is reported, not raised.
    """
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[0] != matrix.shape[1] or rhs.shape != (matrix.shape[0],):
        raise DimensionMismatchError(params={"expected": matrix.shape, "actual": rhs.shape})

    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return SolveResult(np.zeros_like(rhs), 0, True, 0.0)

    A = matrix.to_scipy()
    preconditioner = ILU0(A).as_operator()
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    restart = min(restart, A.shape[0])
    x, info = gmres(
        A, rhs, rtol=rtol, atol=0.0, restart=restart,
        maxiter=max(1, math.ceil(max_iter / restart)), M=preconditioner,
        callback=count, callback_type="pr_norm",
    )
    residual = np.linalg.norm(rhs - A @ x)
    converged = info == 0 and residual <= rtol * b_norm * (1.0 + 1e-8)
    logger.debug("gmres: n=%d iterations=%d residual=%.3e info=%d", A.shape[0], iterations, residual / b_norm, info)
    return SolveResult(x, iterations, converged, residual / b_norm)


def solve_dense_lu(matrix, rhs) -> np.ndarray:
    """
    Partial-pivoting LU solve of a dense system of size at most DENSE_LU_LIMIT.
    """
    A = np.asarray(matrix.to_dense() if isinstance(matrix, CsrMatrix) else matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or rhs.shape[0] != n:
        raise DimensionMismatchError(params={"expected": (n, n), "actual": rhs.shape})
    if n > DENSE_LU_LIMIT:
        raise DimensionMismatchError(
            "Dense LU is limited to %(expected)s unknowns, got %(actual)s.",
            params={"expected": DENSE_LU_LIMIT, "actual": n},
        )

    scale = np.max(np.abs(A)) if A.size else 0.0
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.any(pivots <= 1e-14 * scale):
        row = int(np.argmin(pivots)) if pivots.size else 0
        raise SingularMatrixError(params={"pivot": float(pivots[row]) if pivots.size else 0.0, "row": row})
    return scipy.linalg.lu_solve((lu, piv), rhs)


def solve_direct(matrix: CsrMatrix, rhs) -> np.ndarray:
    return spsolve(matrix.to_scipy().tocsc(), np.asarray(rhs, dtype=float))


def write_matrix_market(matrix: CsrMatrix, path: Union[str, Path], comment: str = "") -> None:
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, matrix.to_scipy().tocoo(), comment=comment, field="real", symmetry="general")
    except OSError as exc:
        raise OutputError(params={"path": str(path), "reason": exc.strerror or exc})


def kron_patterns(outer: SparsityPattern, inner: SparsityPattern) -> SparsityPattern:
    """
    Pattern of outer (x) inner: block (I, J) of the result is `inner` wherever (I, J) is in `outer`.
    """
    return SparsityPattern.from_scipy(sp.kron(outer.to_scipy(np.int8), inner.to_scipy(np.int8), format="csr"))


def residual_norm(matrix: CsrMatrix, x, rhs) -> float:
    return float(np.linalg.norm(np.asarray(rhs) - spmv(matrix, x)))

