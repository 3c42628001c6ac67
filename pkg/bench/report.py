from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

from bench.runner import BenchReport, BenchRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "impl", "mode", "dims", "B", "N", "S", "D", "precision", "iters",
    "mean_ms", "median_ms", "stddev_ms", "speedup_times", "speedup_pct",
)


def _csv_values(row: BenchRow) -> list[str]:
    return [
        row.impl,
        row.mode,
        ",".join(str(d) for d in row.dims),
        str(row.B), str(row.N), str(row.S), str(row.D),
        row.precision,
        str(row.iters),
        f"{row.mean_ms:.6f}",
        f"{row.median_ms:.6f}",
        f"{row.stddev_ms:.6f}",
        f"{row.speedup_times:.6f}",
        f"{row.speedup_pct:.6f}",
    ]


def render_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(_csv_values(row))
    return buf.getvalue()


def render_md(report: BenchReport) -> str:
    base = report.baseline
    lines = [
        f"Shape B={base.B} N={base.N} S={base.S} D={base.D}, mode {base.mode}, "
        f"dims {'+'.join(str(d) for d in base.dims)}, {base.precision}-bit, {base.iters} iters",
        "",
        "| impl | mean (ms) | median (ms) | stddev (ms) | speedup | time saved |",
        "|---|---:|---:|---:|---:|---:|",
    ]
    for row in report.rows:
        lines.append(
            f"| {row.impl} | {row.mean_ms:.3f} | {row.median_ms:.3f} | {row.stddev_ms:.3f} "
            f"| {row.speedup_times:.2f}x | {row.speedup_pct * 100:.1f}% |"
        )
    return "\n".join(lines) + "\n"


def render_json(report: BenchReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


RENDERERS = {"csv": render_csv, "md": render_md, "json": render_json}


def write_report(report: BenchReport, fmt: str, path: Path | str | None = None) -> str:
    """Render the report; write it to path when one is given. Returns the text either way."""
    try:
        render = RENDERERS[fmt]
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r} (choose {', '.join(RENDERERS)})") from None
    text = render(report)
    if path is not None:
        Path(path).write_text(text, newline="")
        logger.info("Wrote %s report to %s", fmt, path)
    return text
