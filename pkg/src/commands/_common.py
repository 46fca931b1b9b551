# commands/_common.py
import sys
from typing import Optional, Sequence

import config
from backends.base import Backend
from evaluation.harness import read_scores, rows_to_table
from evaluation.metrics import ScoreTable
from loader import PromptTemplate, get_templates
from scorers.base import ScorerContext
from scorers.registry import METHODS, resolve_methods
from utility.report_utils import ReportRow
from views.report_view import render_table, write_report


def split_csv(text: Optional[str]) -> list[str]:
    return [p.strip() for p in (text or "").split(",") if p.strip()]


def method_list(text: Optional[str], cfg: config.RunConfig) -> list[str]:
    """Methods from a comma list, falling back to the configured roster."""
    names = split_csv(text)
    return resolve_methods(names) if names else list(cfg.scoring.methods)


def needs_backend(methods: Sequence[str]) -> bool:
    return any(METHODS[m].needs_backend for m in methods)


def supervised(methods: Sequence[str]) -> list[str]:
    return [m for m in methods if METHODS[m].supervised]


def prompts_for(cfg: config.RunConfig) -> dict[str, PromptTemplate]:
    return get_templates(cfg.prompts_path)


def scorer_context(cfg: config.RunConfig, backend: Optional[Backend]) -> ScorerContext:
    return ScorerContext(
        backend=backend,
        settings=cfg.scoring,
        sampling=cfg.sampling,
        prompts=prompts_for(cfg),
    )


def load_table(path: str, methods: Optional[Sequence[str]] = None) -> ScoreTable:
    return rows_to_table(read_scores(path), methods)


def table_methods(text: Optional[str], table: ScoreTable) -> list[str]:
    """Requested methods, or every method in the score file."""
    names = split_csv(text)
    return resolve_methods(names) if names else table.methods


def emit(rows: Sequence[ReportRow], out: Optional[str]) -> None:
    print(render_table(rows), file=sys.stdout)
    if out:
        write_report(rows, out)
        print(f"wrote {len(rows)} rows to {out}", file=sys.stdout)
