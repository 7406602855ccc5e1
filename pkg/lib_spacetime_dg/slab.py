"""
Temporal meshing into tensor-product slabs, space-major DoF numbering and the
doubly-linked slab collection.

A slab is the Cartesian product of consecutive temporal intervals with the one
spatial mesh; all slabs share the same SpatialDoFHandler and spatial pattern.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, DoFIndexError
from .linalg import SparsityPattern, kron_patterns
from .spatial_fe import QLagrangeElement, SpatialDoFHandler, build_spatial_sparsity, refine_uniform
from .temporal_fe import TemporalBasis

logger = logging.getLogger(__name__)

LIMIT_COEFFICIENT_THRESHOLD = 1e-13


@dataclass(frozen=True)
class TemporalMesh:
    breaks: np.ndarray

    def __post_init__(self):
        breaks = np.asarray(self.breaks, dtype=float)
        if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0.0):
            raise ConfigurationError(
                "Temporal break points must be strictly increasing.", code="invalid_temporal_mesh", attr="breaks"
            )
        breaks.setflags(write=False)
        object.__setattr__(self, "breaks", breaks)

    @property
    def n_intervals(self) -> int:
        return self.breaks.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    @property
    def end_time(self) -> float:
        return float(self.breaks[-1])

    def interval(self, m: int) -> Tuple[float, float]:
        if not 0 <= m < self.n_intervals:
            raise DoFIndexError(params={"index": m, "size": self.n_intervals})
        return float(self.breaks[m]), float(self.breaks[m + 1])

    def bisect(self) -> "TemporalMesh":
        midpoints = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        return TemporalMesh(np.sort(np.concatenate([self.breaks, midpoints])))


def make_temporal_mesh(end_time: float, n_intervals: int) -> TemporalMesh:
    if not end_time > 0.0:
        raise ConfigurationError("End time must be positive, got %(value)s.", params={"value": end_time}, attr="end_time")
    if isinstance(n_intervals, bool) or not isinstance(n_intervals, (int, np.integer)) or n_intervals < 1:
        raise ConfigurationError(
            "Number of intervals must be at least 1, got %(value)s.", params={"value": n_intervals}, attr="n_intervals"
        )
    breaks = np.linspace(0.0, end_time, n_intervals + 1)
    breaks[-1] = end_time
    return TemporalMesh(breaks)


def st_dof_index(i_x: int, i_t: int, n_x: int) -> int:
    """
    Space-major numbering i = i_x + n_x * i_t.
    """
    if not 0 <= i_x < n_x:
        raise DoFIndexError(params={"index": i_x, "size": n_x})
    if i_t < 0:
        raise DoFIndexError(params={"index": i_t, "size": "inf"})
    return i_x + n_x * i_t


def split_st_dof_index(i: int, n_x: int) -> Tuple[int, int]:
    if i < 0:
        raise DoFIndexError(params={"index": i, "size": "inf"})
    i_t, i_x = divmod(i, n_x)
    return i_x, i_t


def nonzero_limit_indices(coefficients) -> np.ndarray:
    return np.flatnonzero(np.abs(coefficients) > LIMIT_COEFFICIENT_THRESHOLD)


def temporal_pattern(n_intervals: int, basis: TemporalBasis) -> SparsityPattern:
    """
    Dense (r+1)^2 blocks per interval plus the jump coupling of interval m to m-1:
    rows with a nonzero left limit against columns with a nonzero right limit.
    """
    n = basis.n_dofs
    dense = np.arange(n)
    plus = nonzero_limit_indices(basis.limit_left())
    minus = nonzero_limit_indices(basis.limit_right())

    rows, cols = [], []
    for m in range(n_intervals):
        offset = m * n
        rows.append(np.repeat(offset + dense, n))
        cols.append(np.tile(offset + dense, n))
        if m > 0:
            rows.append(np.repeat(offset + plus, minus.size))
            cols.append(np.tile(offset - n + minus, plus.size))
    size = n_intervals * n
    return SparsityPattern.from_pairs(np.concatenate(rows), np.concatenate(cols), (size, size))


def build_spacetime_sparsity(spatial: SparsityPattern, temporal: SparsityPattern, n_x: int) -> SparsityPattern:
    if spatial.shape != (n_x, n_x):
        raise DimensionMismatchError(params={"expected": (n_x, n_x), "actual": spatial.shape})
    return kron_patterns(temporal, spatial)


class Slab:
    """
    Consecutive temporal intervals of a TemporalMesh times the shared spatial
    discretisation. Linked to its neighbours in the owning triangulation.
    """

    def __init__(
            self,
            index: int,
            intervals: Sequence[int],
            temporal_mesh: TemporalMesh,
            dof_handler: SpatialDoFHandler,
            basis: TemporalBasis,
            spatial_pattern: Optional[SparsityPattern] = None,
    ):
        intervals = list(intervals)
        if not intervals or np.any(np.diff(intervals) != 1):
            raise ConfigurationError("Slab intervals must be consecutive.", code="invalid_slab", attr="intervals")
        self.index = index
        self.intervals = intervals
        self.temporal_mesh = temporal_mesh
        self.dof_handler = dof_handler
        self.basis = basis
        self.spatial_pattern = spatial_pattern or build_spatial_sparsity(dof_handler)
        self.prev: Optional["Slab"] = None
        self.next: Optional["Slab"] = None
        self._pattern: Optional[SparsityPattern] = None

    def __repr__(self):
        return "Slab(index=%d, intervals=%d..%d, n_dofs=%d)" % (
            self.index, self.intervals[0], self.intervals[-1], self.n_dofs,
        )

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def n_x(self) -> int:
        return self.dof_handler.n_dofs

    @property
    def n_t(self) -> int:
        return self.n_intervals * self.basis.n_dofs

    @property
    def n_dofs(self) -> int:
        return self.n_x * self.n_t

    @property
    def start_time(self) -> float:
        return self.interval_bounds(0)[0]

    @property
    def end_time(self) -> float:
        return self.interval_bounds(self.n_intervals - 1)[1]

    def interval_bounds(self, m: int) -> Tuple[float, float]:
        """
        (t_start, t_end) of the m-th interval of this slab.
        """
        if not 0 <= m < self.n_intervals:
            raise DoFIndexError(params={"index": m, "size": self.n_intervals})
        return self.temporal_mesh.interval(self.intervals[m])

    def temporal_offset(self, m: int) -> int:
        return m * self.basis.n_dofs

    def node_times(self) -> np.ndarray:
        times = []
        for m in range(self.n_intervals):
            t0, t1 = self.interval_bounds(m)
            times.append(t0 + (t1 - t0) * self.basis.nodes)
        return np.concatenate(times)

    @property
    def temporal_pattern(self) -> SparsityPattern:
        return temporal_pattern(self.n_intervals, self.basis)

    @property
    def sparsity_pattern(self) -> SparsityPattern:
        if self._pattern is None:
            self._pattern = build_spacetime_sparsity(self.spatial_pattern, self.temporal_pattern, self.n_x)
        return self._pattern


class SpaceTimeTriangulation:
    """
    Ordered, doubly-linked slabs covering (0, T). N_max = 0 keeps a single slab
    (all-at-once); N_max = 1 gives one slab per interval (time stepping).
    """

    def __init__(self, temporal_mesh: TemporalMesh, n_max: int, dof_handler: SpatialDoFHandler, basis: TemporalBasis):
        if n_max < 0:
            raise ConfigurationError("N_max must be non-negative, got %(value)s.", params={"value": n_max}, attr="n_max")
        self.temporal_mesh = temporal_mesh
        self.n_max = n_max
        self.dof_handler = dof_handler
        self.basis = basis
        self.spatial_pattern = build_spatial_sparsity(dof_handler)

        M = temporal_mesh.n_intervals
        chunk = M if n_max == 0 else n_max
        self.first: Optional[Slab] = None
        self.last: Optional[Slab] = None
        self._length = 0
        for start in range(0, M, chunk):
            self._append(range(start, min(start + chunk, M)))

    def _append(self, intervals: range) -> None:
        slab = Slab(self._length, intervals, self.temporal_mesh, self.dof_handler, self.basis, self.spatial_pattern)
        if self.last is None:
            self.first = slab
        else:
            self.last.next = slab
            slab.prev = self.last
        self.last = slab
        self._length += 1

    def __repr__(self):
        return "SpaceTimeTriangulation(slabs=%d, intervals=%d, n_max=%d)" % (
            len(self), self.temporal_mesh.n_intervals, self.n_max,
        )

    def __len__(self):
        return self._length

    def __iter__(self) -> Iterator[Slab]:
        slab = self.first
        while slab is not None:
            yield slab
            slab = slab.next

    def __reversed__(self) -> Iterator[Slab]:
        slab = self.last
        while slab is not None:
            yield slab
            slab = slab.prev

    @property
    def n_x(self) -> int:
        return self.dof_handler.n_dofs

    @property
    def n_dofs(self) -> int:
        return sum(slab.n_dofs for slab in self)


def partition_into_slabs(
        temporal_mesh: TemporalMesh,
        n_max: int,
        dof_handler: SpatialDoFHandler,
        basis: TemporalBasis,
) -> SpaceTimeTriangulation:
    tri = SpaceTimeTriangulation(temporal_mesh, n_max, dof_handler, basis)
    logger.debug(
        "partitioned %d intervals into %d slabs (n_max=%d, n_x=%d)",
        temporal_mesh.n_intervals, len(tri), n_max, tri.n_x,
    )
    return tri


def refine_temporal(tri: SpaceTimeTriangulation) -> SpaceTimeTriangulation:
    return SpaceTimeTriangulation(tri.temporal_mesh.bisect(), tri.n_max, tri.dof_handler, tri.basis)


def refine_spatial(tri: SpaceTimeTriangulation) -> SpaceTimeTriangulation:
    element = tri.dof_handler.element
    dof_handler = SpatialDoFHandler(refine_uniform(tri.dof_handler.mesh), QLagrangeElement(element.degree, element.dim))
    return SpaceTimeTriangulation(tri.temporal_mesh, tri.n_max, dof_handler, tri.basis)


class TimeCursor:
    """
    Position inside one sequence registered with a TimeIteratorCollection.
    """

    def __init__(self, sequence: Sequence, index: int = 0):
        self.items = list(sequence)
        self.index = index

    def __repr__(self):
        return "TimeCursor(index=%d, length=%d)" % (self.index, len(self.items))

    @property
    def value(self):
        if not 0 <= self.index < len(self.items):
            raise DoFIndexError(params={"index": self.index, "size": len(self.items)})
        return self.items[self.index]

    @value.setter
    def value(self, item) -> None:
        if not 0 <= self.index < len(self.items):
            raise DoFIndexError(params={"index": self.index, "size": len(self.items)})
        self.items[self.index] = item


class TimeIteratorCollection:
    """
    Moves cursors over slab-indexed sequences in lock step, e.g. the slabs of a
    triangulation together with one solution vector per slab.
    """

    def __init__(self):
        self._cursors: List[TimeCursor] = []
        self._length: Optional[int] = None
        self._position = 0

    def add_iterator(self, sequence: Sequence) -> TimeCursor:
        cursor = TimeCursor(sequence, self._position)
        if self._length is None:
            self._length = len(cursor.items)
        elif len(cursor.items) != self._length:
            raise DimensionMismatchError(params={"expected": self._length, "actual": len(cursor.items)})
        self._cursors.append(cursor)
        return cursor

    @property
    def position(self) -> int:
        return self._position

    def _move_to(self, position: int) -> None:
        self._position = position
        for cursor in self._cursors:
            cursor.index = position

    def increment(self) -> None:
        self._move_to(self._position + 1)

    def decrement(self) -> None:
        self._move_to(self._position - 1)

    def rewind(self) -> None:
        self._move_to(0)

    def fast_forward(self) -> None:
        self._move_to((self._length or 0) - 1)

    def at_end(self) -> bool:
        return any(cursor.index >= len(cursor.items) for cursor in self._cursors)

    def before_begin(self) -> bool:
        return any(cursor.index < 0 for cursor in self._cursors)
