"""
Convergence studies on the moving-peak heat problem.
"""
import csv
import functools
import logging
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigurationError, OutputError
from .heat_problem import MovingPeakSolution, SolverOptions, eoc, evaluate_at_time, l2_l2_error, march
from .linalg import StVector
from .settings import DEFAULTS, StudySettings
from .slab import SpaceTimeTriangulation, make_temporal_mesh, partition_into_slabs
from .spatial_fe import MAX_SPATIAL_DEGREE, QLagrangeElement, SpatialDoFHandler, make_hypercube_mesh
from .temporal_fe import MAX_TEMPORAL_DEGREE, SupportType, TemporalBasis
from .validators import ChoiceValidator, PositiveValidator, RangeValidator

logger = logging.getLogger(__name__)

REFINE_MODES = ("h", "k", "kh")
SUPPORT_TYPES = tuple(member.value for member in SupportType)
CSV_HEADER = ("level", "M", "Nx", "dofs", "error", "eoc", "seconds")


@dataclass(frozen=True)
class StudyConfig:
    dim: int = 2
    s: int = 1
    r: int = 1
    support_type: str = "lobatto"
    end_time: float = 1.0
    n_intervals: int = 4
    n_refinements: int = 3
    n_max: int = 0
    steps: int = 3
    refine_mode: str = "kh"
    solver: str = "gmres"
    rtol: float = 1e-12
    max_iter: int = 5000
    restart: int = 50
    workers: int = 1
    record_timings: bool = True
    compare_support_types: bool = False
    csv: Optional[str] = None
    vtk: Optional[str] = None
    vtk_slices: int = 5
    json: Optional[str] = None

    def __post_init__(self):
        RangeValidator("dim", 1, 2)(self.dim)
        RangeValidator("s", 1, MAX_SPATIAL_DEGREE)(self.s)
        RangeValidator("r", 0, MAX_TEMPORAL_DEGREE)(self.r)
        try:
            support_type = SupportType(self.support_type).value
        except ValueError:
            support_type = ChoiceValidator("support_type", SUPPORT_TYPES)(self.support_type)
        object.__setattr__(self, "support_type", support_type)
        PositiveValidator("end_time")(self.end_time)
        RangeValidator("n_intervals", 1)(self.n_intervals)
        RangeValidator("n_refinements", 0)(self.n_refinements)
        RangeValidator("n_max", 0)(self.n_max)
        RangeValidator("steps", 1)(self.steps)
        object.__setattr__(self, "refine_mode", ChoiceValidator("refine_mode", REFINE_MODES)(self.refine_mode))
        object.__setattr__(self, "solver", ChoiceValidator("solver", ("gmres", "direct"))(self.solver))
        PositiveValidator("rtol")(self.rtol)
        RangeValidator("max_iter", 1)(self.max_iter)
        RangeValidator("restart", 1)(self.restart)
        RangeValidator("workers", 1)(self.workers)
        RangeValidator("vtk_slices", 1)(self.vtk_slices)
        for key in ("dim", "s", "r", "n_intervals", "n_refinements", "n_max", "steps", "max_iter", "restart",
                    "workers", "vtk_slices"):
            if not isinstance(getattr(self, key), (int, np.integer)):
                raise ConfigurationError("%(key)s must be an integer.", code="invalid_type", params={"key": key},
                                         attr=key)

    @classmethod
    def from_settings(cls, settings: Union[StudySettings, Mapping]) -> "StudyConfig":
        if isinstance(settings, Mapping):
            merged = {**DEFAULTS, **settings}
            get = merged.__getitem__
        else:
            get = functools.partial(getattr, settings)
        return cls(
            dim=get("DIM"),
            s=get("SPATIAL_DEGREE"),
            r=get("TEMPORAL_DEGREE"),
            support_type=get("SUPPORT_TYPE"),
            end_time=get("END_TIME"),
            n_intervals=get("N_INTERVALS"),
            n_refinements=get("N_REFINEMENTS"),
            n_max=get("N_MAX"),
            steps=get("STEPS"),
            refine_mode=get("REFINE_MODE"),
            solver=get("SOLVER"),
            rtol=get("RTOL"),
            max_iter=get("MAX_ITER"),
            restart=get("RESTART"),
            workers=get("ASSEMBLY_WORKERS"),
            record_timings=get("RECORD_TIMINGS"),
            compare_support_types=get("COMPARE_SUPPORT_TYPES"),
            csv=get("CSV"),
            vtk=get("VTK"),
            vtk_slices=get("VTK_SLICES"),
            json=get("JSON"),
        )

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(self.solver, self.rtol, self.max_iter, self.restart, self.workers)

    def level_parameters(self, level: int):
        """
        (number of intervals, spatial refinement level) of study level `level`.
        """
        refine_time = self.refine_mode in ("k", "kh")
        refine_space = self.refine_mode in ("h", "kh")
        return (
            self.n_intervals * 2 ** (level if refine_time else 0),
            self.n_refinements + (level if refine_space else 0),
        )


@dataclass(frozen=True)
class StudyRow:
    level: int
    M: int
    Nx: int
    dofs: int
    error: float
    eoc: Optional[float]
    seconds: float
    h: float
    k: float

    def as_csv_row(self) -> List[str]:
        return [
            str(self.level),
            str(self.M),
            str(self.Nx),
            str(self.dofs),
            "%.12e" % self.error,
            "" if self.eoc is None else "%.6f" % self.eoc,
            "%.6f" % self.seconds,
        ]


def build_triangulation(cfg: StudyConfig, level: int, support_type: Optional[str] = None) -> SpaceTimeTriangulation:
    n_intervals, spatial_level = cfg.level_parameters(level)
    dof_handler = SpatialDoFHandler(make_hypercube_mesh(cfg.dim, spatial_level), QLagrangeElement(cfg.s, cfg.dim))
    basis = TemporalBasis(cfg.r, support_type or cfg.support_type)
    return partition_into_slabs(make_temporal_mesh(cfg.end_time, n_intervals), cfg.n_max, dof_handler, basis)


LevelCallback = Callable[[StudyRow, SpaceTimeTriangulation, List[StVector]], None]


def run_study(cfg: StudyConfig, on_level: Optional[LevelCallback] = None) -> List[StudyRow]:
    """
    Solves the moving-peak problem on `cfg.steps` successively refined meshes.
    `on_level` is called after every level, so callers can persist partial results.
    """
    solution = MovingPeakSolution(cfg.dim)
    options = cfg.solver_options
    rows: List[StudyRow] = []

    for level in range(cfg.steps):
        tri = build_triangulation(cfg, level)
        started = time.perf_counter()
        solutions = march(tri, solution, options=options)
        error = l2_l2_error(tri, solutions, solution)
        seconds = time.perf_counter() - started if cfg.record_timings else 0.0

        n_intervals = tri.temporal_mesh.n_intervals
        h = tri.dof_handler.mesh.cell_size
        k = cfg.end_time / n_intervals
        order = None
        if rows:
            size, previous_size = (k, rows[-1].k) if cfg.refine_mode == "k" else (h, rows[-1].h)
            order = eoc([rows[-1].error, error], [previous_size, size])[0]

        row = StudyRow(
            level=level,
            M=n_intervals,
            Nx=tri.n_x,
            dofs=n_intervals * tri.basis.n_dofs * tri.n_x,
            error=error,
            eoc=order,
            seconds=seconds,
            h=h,
            k=k,
        )
        rows.append(row)
        logger.info(
            "level %d: M=%d Nx=%d dofs=%d error=%.6e eoc=%s",
            row.level, row.M, row.Nx, row.dofs, row.error, "-" if order is None else "%.3f" % order,
        )
        if on_level is not None:
            on_level(row, tri, solutions)
    return rows


@dataclass(frozen=True)
class SupportTypeRatio:
    level: int
    M: int
    errors: Dict[str, float]

    @property
    def ratios(self) -> Dict[str, float]:
        reference = self.errors[SupportType.lobatto.value]
        return {name: error / reference for name, error in self.errors.items()}


def run_support_type_comparison(cfg: StudyConfig) -> List[SupportTypeRatio]:
    """
    Errors of every support type relative to Gauss-Lobatto, level by level.
    """
    if cfg.r < 1:
        raise ConfigurationError(
            "Support types only differ for r >= 1, got %(value)s.", params={"value": cfg.r}, attr="r"
        )
    errors: Dict[str, List[StudyRow]] = {}
    for support_type in SUPPORT_TYPES:
        logger.info("support type %s", support_type)
        errors[support_type] = run_study(replace(cfg, support_type=support_type, compare_support_types=False))

    return [
        SupportTypeRatio(
            level=level,
            M=errors[SupportType.lobatto.value][level].M,
            errors={name: rows[level].error for name, rows in errors.items()},
        )
        for level in range(cfg.steps)
    ]


class CsvRowWriter:
    """
    Writes study rows as they arrive; the file always holds complete lines.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = self.path.open("w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OutputError(params={"path": str(self.path), "reason": exc.strerror or exc})
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._write(CSV_HEADER)

    def _write(self, fields: Sequence[str]) -> None:
        try:
            self._writer.writerow(fields)
            self._file.flush()
        except OSError as exc:
            raise OutputError(params={"path": str(self.path), "reason": exc.strerror or exc})

    def write_row(self, row: StudyRow) -> None:
        self._write(row.as_csv_row())

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def write_csv(rows: Sequence[StudyRow], path: Union[str, Path]) -> None:
    with CsvRowWriter(path) as writer:
        for row in rows:
            writer.write_row(row)


def _vtk_lines(tri: SpaceTimeTriangulation, values: np.ndarray, t: float) -> List[str]:
    dof_handler = tri.dof_handler
    n = dof_handler.n_nodes_1d
    points = dof_handler.support_points
    dims = [n if d < points.shape[1] else 1 for d in range(3)]
    lines = [
        "# vtk DataFile Version 3.0",
        "u at t=%.12g" % t,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        "DIMENSIONS %d %d %d" % tuple(dims),
        "POINTS %d double" % points.shape[0],
    ]
    padded = np.zeros((points.shape[0], 3))
    padded[:, :points.shape[1]] = points
    lines.extend("%.12g %.12g %.12g" % tuple(point) for point in padded)
    lines.extend([
        "POINT_DATA %d" % points.shape[0],
        "SCALARS u double 1",
        "LOOKUP_TABLE default",
    ])
    lines.extend("%.12g" % value for value in values)
    return lines


def write_vtk_slices(
        tri: SpaceTimeTriangulation,
        solutions: Sequence[StVector],
        times: Sequence[float],
        directory: Union[str, Path],
        prefix: str = "solution",
) -> List[Path]:
    """
    One legacy ASCII STRUCTURED_GRID file per requested time.
    """
    directory = Path(directory)
    paths = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(params={"path": str(directory), "reason": exc.strerror or exc})
    for index, t in enumerate(times):
        values = evaluate_at_time(tri, solutions, t)
        path = directory / ("%s_%04d.vtk" % (prefix, index))
        try:
            path.write_text("\n".join(_vtk_lines(tri, values, t)) + "\n", encoding="ascii")
        except OSError as exc:
            raise OutputError(params={"path": str(path), "reason": exc.strerror or exc})
        paths.append(path)
    return paths


def slice_times(end_time: float, n_slices: int) -> np.ndarray:
    return np.linspace(0.0, end_time, n_slices)


def config_summary(cfg: StudyConfig) -> Dict:
    return asdict(cfg)


def write_ratio_csv(comparison: Sequence[SupportTypeRatio], path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("level", "M") + SUPPORT_TYPES)
            for item in comparison:
                ratios = item.ratios
                writer.writerow([str(item.level), str(item.M)] + ["%.8f" % ratios[name] for name in SUPPORT_TYPES])
    except OSError as exc:
        raise OutputError(params={"path": str(path), "reason": exc.strerror or exc})
