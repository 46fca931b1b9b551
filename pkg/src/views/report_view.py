# views/report_view.py
"""Report rendering: CSV, JSONL, aligned console tables and curve-point files."""
import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from utility.report_utils import REPORT_COLUMNS, ReportRow


def _ensure_parent(path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_report_csv(rows: Iterable[ReportRow], path: str | Path) -> Path:
    p = _ensure_parent(path)
    with p.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow(r.to_dict())
    return p


def write_report_jsonl(rows: Iterable[ReportRow], path: str | Path) -> Path:
    p = _ensure_parent(path)
    with p.open("w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r.to_dict()) + "\n")
    return p


def write_report(rows: Sequence[ReportRow], path: str | Path) -> Path:
    """CSV unless the suffix is .jsonl."""
    if Path(path).suffix.lower() == ".jsonl":
        return write_report_jsonl(rows, path)
    return write_report_csv(rows, path)


def read_report(path: str | Path) -> list[ReportRow]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"report not found: {p}")
    with p.open(encoding="utf-8", newline="") as f:
        if p.suffix.lower() == ".jsonl":
            return [ReportRow.from_dict(json.loads(line)) for line in f if line.strip()]
        return [ReportRow.from_dict(raw) for raw in csv.DictReader(f)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_table(rows: Sequence[ReportRow]) -> str:
    if not rows:
        return "(no rows)"
    cells = [list(REPORT_COLUMNS)] + [[_fmt(v) for v in r.to_dict().values()] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_curve(path: str | Path, header: Sequence[str], columns: Sequence[Sequence[float]]) -> Path:
    """Column-aligned points, one CSV row per point."""
    if len(header) != len(columns):
        raise ValueError(f"{len(header)} headers for {len(columns)} columns")
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ValueError(f"curve columns differ in length: {sorted(lengths)}")
    p = _ensure_parent(path)
    with p.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(zip(*columns))
    return p
