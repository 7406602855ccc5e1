"""
Command-line entry point: `study --config study.cfg --refine-mode k --r 1 ...`

Values come from DEFAULTS, then the config file, then command-line flags.
Exit code 0 on success, 1 on solver or output failure, 2 on configuration errors.
"""
import argparse
import logging
import sys
from typing import Dict, Optional, Sequence

from .custom_handler import custom_exception_handler
from .exceptions import SpaceTimeError
from .renderer import SummaryRenderer, render_ratio_table, render_table
from .settings import coerce_value, load_settings_file, study_settings, update_study_settings
from .study import (
    REFINE_MODES,
    SUPPORT_TYPES,
    CsvRowWriter,
    StudyConfig,
    config_summary,
    run_study,
    run_support_type_comparison,
    slice_times,
    write_ratio_csv,
    write_vtk_slices,
)
from .validators import ChoiceValidator

logger = logging.getLogger(__name__)

LOG_LEVELS = ("debug", "info", "warning", "error")

# flag destination -> settings key
FLAG_SETTINGS = {
    "dim": "DIM",
    "s": "SPATIAL_DEGREE",
    "r": "TEMPORAL_DEGREE",
    "support_type": "SUPPORT_TYPE",
    "end_time": "END_TIME",
    "intervals": "N_INTERVALS",
    "refinements": "N_REFINEMENTS",
    "nmax": "N_MAX",
    "steps": "STEPS",
    "refine_mode": "REFINE_MODE",
    "solver": "SOLVER",
    "rtol": "RTOL",
    "max_iter": "MAX_ITER",
    "restart": "RESTART",
    "workers": "ASSEMBLY_WORKERS",
    "compare_support_types": "COMPARE_SUPPORT_TYPES",
    "no_timings": "RECORD_TIMINGS",
    "csv": "CSV",
    "vtk": "VTK",
    "vtk_slices": "VTK_SLICES",
    "json": "JSON",
    "log_level": "LOG_LEVEL",
    "debug": "DEBUG",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="study",
        description="Convergence studies for the cG(s)dG(r) space-time heat equation solver.",
    )
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("--refine-mode", choices=REFINE_MODES)
    parser.add_argument("--r", type=int, help="temporal degree")
    parser.add_argument("--s", type=int, help="spatial degree")
    parser.add_argument("--support-type", choices=SUPPORT_TYPES)
    parser.add_argument("--nmax", type=int, help="intervals per slab, 0 keeps one slab")
    parser.add_argument("--steps", type=int, help="number of refinement levels")
    parser.add_argument("--dim", type=int, choices=(1, 2))
    parser.add_argument("--end-time", type=float)
    parser.add_argument("--intervals", type=int, help="temporal intervals on the coarsest level")
    parser.add_argument("--refinements", type=int, help="spatial refinements on the coarsest level")
    parser.add_argument("--solver", choices=("gmres", "direct"))
    parser.add_argument("--rtol", type=float)
    parser.add_argument("--max-iter", type=int)
    parser.add_argument("--restart", type=int, help="GMRES restart length")
    parser.add_argument("--workers", type=int, help="threads for local assembly")
    parser.add_argument("--compare-support-types", action="store_const", const=True)
    parser.add_argument("--no-timings", action="store_const", const=False,
                        help="write 0.0 seconds so reruns give identical CSV files")
    parser.add_argument("--csv", help="CSV file for the study rows")
    parser.add_argument("--vtk", help="directory for VTK slices of the finest level")
    parser.add_argument("--vtk-slices", type=int)
    parser.add_argument("--json", help="JSON summary file")
    parser.add_argument("--log-level", type=str.lower, choices=LOG_LEVELS)
    parser.add_argument("--debug", action="store_const", const=True, help="re-raise unexpected errors")
    return parser


def collect_settings(args: argparse.Namespace) -> Dict:
    user_settings = load_settings_file(args.config) if args.config else {}
    for dest, key in FLAG_SETTINGS.items():
        value = getattr(args, dest)
        if value is not None:
            user_settings[key] = coerce_value(key, value)
    return user_settings


def configure_logging(level: str) -> None:
    level = ChoiceValidator("log_level", LOG_LEVELS)(level)
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def execute(cfg: StudyConfig) -> Dict:
    renderer = SummaryRenderer()
    finest = {}

    if cfg.compare_support_types:
        comparison = run_support_type_comparison(cfg)
        print(render_ratio_table(comparison))
        if cfg.csv:
            write_ratio_csv(comparison, cfg.csv)
        return renderer.build([], config_summary(cfg), comparison)

    writer = CsvRowWriter(cfg.csv) if cfg.csv else None

    def on_level(row, tri, solutions):
        if writer is not None:
            writer.write_row(row)
        finest.update(tri=tri, solutions=solutions)

    try:
        rows = run_study(cfg, on_level)
    finally:
        if writer is not None:
            writer.close()

    print(render_table(rows))
    if cfg.vtk:
        paths = write_vtk_slices(
            finest["tri"], finest["solutions"], slice_times(cfg.end_time, cfg.vtk_slices), cfg.vtk
        )
        logger.info("wrote %d VTK slices to %s", len(paths), cfg.vtk)
    return renderer.build(rows, config_summary(cfg))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    json_path = args.json
    try:
        update_study_settings(collect_settings(args))
        json_path = study_settings.JSON
        configure_logging(study_settings.LOG_LEVEL)
        cfg = StudyConfig.from_settings(study_settings)
        summary = execute(cfg)
        if cfg.json:
            SummaryRenderer().write(summary, cfg.json)
        return 0
    except Exception as exc:
        result = custom_exception_handler(exc, {"operation": "study", "argv": list(argv or sys.argv[1:])})
        if result is None:
            raise
        if json_path:
            try:
                SummaryRenderer().write(result, json_path)
            except SpaceTimeError:
                logger.error("could not write failure summary to %s", json_path)
        print(result["error"]["detail"], file=sys.stderr)
        return result["status_code"]


if __name__ == "__main__":
    sys.exit(main())
