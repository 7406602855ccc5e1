import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from .exceptions import OutputError

EXIT_MESSAGES = {
    0: "Study completed.",
    1: "Study aborted by a solver or output failure.",
    2: "Invalid configuration.",
}


def envelope(status_code: int, data: Any = None, error: Optional[Dict] = None) -> Dict:
    return {
        "status_code": status_code,
        "message": EXIT_MESSAGES.get(status_code, EXIT_MESSAGES[1]),
        "is_success": status_code == 0,
        "error": error,
        "response": data,
    }


class SummaryRenderer:
    """
    Wraps study results in the success envelope and renders it as JSON.
    """

    indent = 2

    def build(self, rows: Sequence, config: Optional[Dict] = None, comparison: Optional[Sequence] = None) -> Dict:
        data: Dict[str, Any] = {"config": config, "rows": [self._row(row) for row in rows]}
        if comparison is not None:
            data["support_type_ratios"] = [
                {"level": item.level, "M": item.M, "ratios": item.ratios} for item in comparison
            ]
        return envelope(0, data)

    @staticmethod
    def _row(row) -> Dict:
        return {
            "level": row.level,
            "M": row.M,
            "Nx": row.Nx,
            "dofs": row.dofs,
            "error": row.error,
            "eoc": row.eoc,
            "seconds": row.seconds,
        }

    def render(self, data: Dict) -> str:
        return json.dumps(data, indent=self.indent, sort_keys=False)

    def write(self, data: Dict, path: Union[str, Path]) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.render(data) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OutputError(params={"path": str(path), "reason": exc.strerror or exc})


def render_table(rows: Sequence) -> str:
    lines = ["%5s %6s %8s %10s %14s %7s %9s" % ("level", "M", "Nx", "dofs", "error", "eoc", "seconds")]
    for row in rows:
        lines.append("%5d %6d %8d %10d %14.6e %7s %9.3f" % (
            row.level, row.M, row.Nx, row.dofs, row.error,
            "-" if row.eoc is None else "%.3f" % row.eoc, row.seconds,
        ))
    return "\n".join(lines)


def render_ratio_table(comparison: Sequence) -> str:
    """
    Error of every support type as a percentage of the Gauss-Lobatto error.
    """
    if not comparison:
        return ""
    names = list(comparison[0].ratios)
    lines = ["%5s %6s " % ("level", "M") + " ".join("%12s" % name for name in names)]
    for item in comparison:
        ratios = item.ratios
        lines.append("%5d %6d " % (item.level, item.M) + " ".join("%11.2f%%" % (100.0 * ratios[n]) for n in names))
    return "\n".join(lines)
