# commands/evaluate.py
import argparse
from pathlib import Path

import config
from commands._common import emit, load_table, table_methods
from evaluation.metrics import auroc, prr, rejection_curve
from utility.report_utils import ReportRow
from views.report_view import write_curve

METRICS = {"prr": prr, "auroc": auroc}


def register(subparsers) -> None:
    p = subparsers.add_parser("evaluate", help="AUROC / PRR per method on a scores file")
    p.add_argument("--in", dest="inp", required=True, help="scores JSONL")
    p.add_argument("--metric", choices=sorted(METRICS), action="append")
    p.add_argument("--methods", help="comma-separated method ids (default: all in file)")
    p.add_argument("--out", help="report file (.csv or .jsonl)")
    p.add_argument("--curve-dir", help="write rejection-curve points per method here")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    table = load_table(args.inp)
    methods = table_methods(args.methods, table)
    metrics = args.metric or ["prr"]

    rows = []
    for m in methods:
        d = table.dataset(m)
        for name in metrics:
            value = METRICS[name](d)
            rows.append(ReportRow(method=m, cal_set="", metric=name, mean=value))
            print(f"{m}\t{name}\t{value:.4f}")
        if args.curve_dir:
            fraction, precision = rejection_curve(d)
            write_curve(
                Path(args.curve_dir) / f"rejection_{m}.csv",
                ("rejected_fraction", "precision"),
                (fraction, precision),
            )

    if args.out:
        emit(rows, args.out)
    return 0
