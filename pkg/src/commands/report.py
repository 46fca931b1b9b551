# commands/report.py
import argparse

import config
from commands._common import emit
from utility.report_utils import sort_rows
from views.report_view import read_report


def register(subparsers) -> None:
    p = subparsers.add_parser("report", help="merge report files and print a table")
    p.add_argument("inputs", nargs="+", help="CSV or JSONL report files")
    p.add_argument("--out", help="merged CSV (or .jsonl) to write")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    rows = []
    for path in args.inputs:
        rows.extend(read_report(path))
    emit(sort_rows(rows), args.out)
    return 0
