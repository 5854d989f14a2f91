"""
Report output

struct  report.json: the full RunReport (floats in shortest round-trip form)
table   bounds.csv: one row per BoundReport, parameters flattened as param.<key>
series  series/<experiment>__<series>.csv: plot data, one column per field
"""

import csv
from pathlib import Path
from typing import Iterable, List, Optional

from app.models.experiment import RunReport
from app.services.errors import OutputPathError

BOUND_COLUMNS = ["experiment", "name", "lhs", "rhs", "margin", "tolerance", "pass"]


def bound_rows(report: RunReport) -> List[dict]:
    rows = []
    for result in report.results:
        for bound in result.bound_reports:
            row = {
                "experiment": result.name,
                "name": bound.name,
                "lhs": bound.lhs,
                "rhs": bound.rhs,
                "margin": bound.margin,
                "tolerance": bound.tolerance,
                "pass": bound.passed,
            }
            row.update({f"param.{k}": v for k, v in bound.parameters.items()})
            rows.append(row)
    return rows


def _write_csv(path: Path, columns: List[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, restval="")
        writer.writeheader()
        writer.writerows(rows)


def write_struct(report: RunReport, out_dir: Path) -> Path:
    path = out_dir / "report.json"
    path.write_text(report.model_dump_json(by_alias=True, indent=2), encoding="utf-8")
    return path


def write_table(report: RunReport, out_dir: Path) -> Path:
    rows = bound_rows(report)
    params = sorted({k for row in rows for k in row if k.startswith("param.")})
    path = out_dir / "bounds.csv"
    _write_csv(path, BOUND_COLUMNS + params, rows)
    return path


def write_series(report: RunReport, out_dir: Path) -> List[Path]:
    written = []
    series_dir = out_dir / "series"
    for result in report.results:
        for name, columns in result.series.items():
            lengths = {len(v) for v in columns.values()}
            if len(lengths) > 1:
                raise ValueError(f"series {result.name}/{name} has columns of unequal length")
            series_dir.mkdir(parents=True, exist_ok=True)
            path = series_dir / f"{result.name}__{name}.csv"
            keys = list(columns)
            _write_csv(path, keys, (dict(zip(keys, values)) for values in zip(*columns.values())))
            written.append(path)
    return written


def emit(report: RunReport, out_dir: Optional[str] = None, formats: Optional[List[str]] = None) -> List[Path]:
    """Write the requested formats under out_dir; returns the files written"""
    out_dir = Path(out_dir or report.config.output.directory)
    formats = formats or list(report.config.output.formats)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if "struct" in formats:
            written.append(write_struct(report, out_dir))
        if "table" in formats:
            written.append(write_table(report, out_dir))
        if "series" in formats:
            written.extend(write_series(report, out_dir))
    except OSError as e:
        raise OutputPathError(f"cannot write report to {out_dir}: {e}") from e
    return written
