# commands/ensemble.py
import argparse

import config
from commands._common import emit, load_table, supervised, table_methods
from evaluation.ensemble import (
    COMBINERS,
    PREPROCESSORS,
    ensemble_study,
    fit_model,
    fit_preprocessor,
    save_model,
)
from helpers.logging_helper import get_logger

log = get_logger("cli.ensemble")


def register(subparsers) -> None:
    p = subparsers.add_parser("ensemble", help="compare preprocessing x combiner ensembles")
    p.add_argument("--test", required=True, help="scores JSONL to evaluate on")
    p.add_argument("--cal", help="calibration scores JSONL (default: split of the test file)")
    p.add_argument("--methods", help="comma-separated method ids (default: all in file)")
    p.add_argument(
        "--unsupervised-only",
        action="store_true",
        help="drop methods that were trained with labels",
    )
    p.add_argument("--out", help="report file (.csv or .jsonl)")
    p.add_argument("--save-model", help="fit one model on the calibration set and save it")
    p.add_argument("--preprocessor", choices=PREPROCESSORS, default="znorm")
    p.add_argument("--combiner", choices=COMBINERS, default="linear")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    test = load_table(args.test)
    methods = table_methods(args.methods, test)
    cal = load_table(args.cal, methods) if args.cal else test
    exclude = supervised(methods) if args.unsupervised_only else []

    rows = ensemble_study(
        methods,
        cal,
        test,
        cfg.ensemble,
        cal_name="cal" if args.cal else "split",
        seeds=cfg.calibration.seeds,
        exclude=exclude,
    )
    emit(rows, args.out)

    if args.save_model:
        roster = [m for m in methods if m not in exclude]
        X = [[cal.scores[m][i] for m in roster] for i in range(len(cal))]
        pre = fit_preprocessor(args.preprocessor, X, cal.labels, roster)
        model = fit_model(args.combiner, X, cal.labels, pre, cfg.ensemble)
        save_model(model, args.save_model)
        log.info("saved %s:%s model to %s", args.preprocessor, args.combiner, args.save_model)
        print(f"saved model to {args.save_model}")
    return 0
