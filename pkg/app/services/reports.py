"""
Report emission for finished commands.

Every command reduces its results to ReportRow values. CSV uses the fixed
columns below in this order; seconds are printed with three decimals and lines
end in "\\n", so identical rows give identical bytes. For `count` the verdict
column names the color ("color 0", ...) and the last row is "total". For
threshold scans the ground column is the interval [lo..N].
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from app.core.config import ReportFormat
from app.core.errors import WorkbenchError
from app.core.serialization import to_jsonable

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("ground", "n", "template", "method", "verdict", "count", "seconds")


@dataclass
class ReportRow:
    ground: str
    n: int
    template: str
    method: str
    verdict: str
    count: Optional[int] = None
    seconds: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def cells(self) -> List[str]:
        return [
            self.ground, str(self.n), self.template, self.method, self.verdict,
            "" if self.count is None else str(self.count),
            "" if self.seconds is None else "%.3f" % self.seconds,
        ]

    def record(self) -> Dict[str, Any]:
        out = {name: getattr(self, name) for name in CSV_COLUMNS}
        out.update(self.extra)
        return to_jsonable(out)


def render_csv(rows: Sequence[ReportRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buffer.getvalue()


def render_jsonl(rows: Sequence[ReportRow]) -> str:
    return "".join(json.dumps(row.record(), sort_keys=True) + "\n" for row in rows)


def render_pretty(rows: Sequence[ReportRow], title: Optional[str] = None) -> str:
    table = [list(CSV_COLUMNS)] + [row.cells() for row in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(CSV_COLUMNS))]
    lines = [title] if title else []
    for k, line in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        for key, value in row.extra.items():
            lines.append(f"  {key}: {to_jsonable(value)}")
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[ReportRow], format: ReportFormat = ReportFormat.PRETTY,
                path: Optional[str] = None, title: Optional[str] = None) -> bytes:
    """Render rows and write them to `path` when one is given; returns the bytes"""
    format = ReportFormat(format)
    if format is ReportFormat.CSV:
        text = render_csv(rows)
    elif format is ReportFormat.JSONL:
        text = render_jsonl(rows)
    else:
        text = render_pretty(rows, title)
    data = text.encode("utf-8")

    if path:
        try:
            Path(path).write_bytes(data)
        except OSError as e:
            raise WorkbenchError(f"cannot write report {path}: {e}")
        logger.info(f"Report written to {path} ({format.value}, {len(rows)} rows)")
    return data
