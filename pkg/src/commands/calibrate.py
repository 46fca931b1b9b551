# commands/calibrate.py
import argparse
from pathlib import Path

import numpy as np

import config
from commands._common import emit, load_table, split_csv, table_methods
from evaluation.metrics import calibration_curve, shift_study
from helpers.logging_helper import get_logger
from views.report_view import write_curve

log = get_logger("cli.calibrate")

IN_DOMAIN = "in_domain"


def _cal_arg(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name, path


def register(subparsers) -> None:
    p = subparsers.add_parser(
        "calibrate", help="recall-targeted thresholds and ARE under distribution shift"
    )
    p.add_argument("--test", required=True, help="scores JSONL of the test distribution")
    p.add_argument(
        "--cal",
        type=_cal_arg,
        action="append",
        default=[],
        metavar="NAME=PATH",
        help="calibration scores; repeatable (default: split of the test file)",
    )
    p.add_argument("--methods", help="comma-separated method ids (default: all in file)")
    p.add_argument("--seeds", help="comma-separated seeds (default: config)")
    p.add_argument("--out", help="report file (.csv or .jsonl)")
    p.add_argument("--curve-dir", help="write recall-calibration curve points here")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    cal_cfg = cfg.calibration
    test = load_table(args.test)
    methods = table_methods(args.methods, test)
    seeds = [int(s) for s in split_csv(args.seeds)] or list(cal_cfg.seeds)

    cal_sets = {name: load_table(path, methods) for name, path in args.cal}
    if not cal_sets:
        cal_sets = {IN_DOMAIN: test}

    rows = shift_study(
        methods,
        cal_sets,
        test,
        seeds=seeds,
        cal_size=cal_cfg.cal_size,
        test_size=cal_cfg.test_size,
        mode=cal_cfg.threshold_mode,
    )

    if args.curve_dir:
        rng = np.random.default_rng(seeds[0])
        for name, cal in cal_sets.items():
            if cal is test:
                continue
            for m in methods:
                targets, thresholds, achieved = calibration_curve(
                    cal.dataset(m), test.dataset(m), mode=cal_cfg.threshold_mode, rng=rng
                )
                write_curve(
                    Path(args.curve_dir) / f"recall_{name}_{m}.csv",
                    ("target_recall", "threshold", "test_recall"),
                    (targets, thresholds, achieved),
                )
        log.info("curve points written to %s", args.curve_dir)

    emit(rows, args.out)
    return 0
