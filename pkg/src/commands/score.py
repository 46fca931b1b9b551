# commands/score.py
import argparse
import contextlib

import config
from backends.factory import build_backend
from commands._common import method_list, needs_backend, prompts_for, scorer_context
from data.dataset import load_dataset
from evaluation.harness import label_dataset, score_dataset, write_scores
from helpers.logging_helper import get_logger
from utility.trace_utils import LabeledDataset

log = get_logger("cli.score")


def register(subparsers) -> None:
    p = subparsers.add_parser("score", help="score every trace with the chosen methods")
    p.add_argument("--in", dest="inp", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="scores JSONL to write")
    p.add_argument("--methods", help="comma-separated method ids (default: config roster)")
    p.add_argument("--label", action="store_true", help="judge unlabeled traces first")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    methods = method_list(args.methods, cfg)
    ds = load_dataset(args.inp)
    wants_backend = needs_backend(methods) or args.label

    with contextlib.ExitStack() as stack:
        backend = stack.enter_context(build_backend(cfg)) if wants_backend else None
        if args.label:
            unlabeled = [e.trace for e in ds if e.label is None]
            if unlabeled:
                judged = label_dataset(
                    unlabeled,
                    backend,
                    prompts=prompts_for(cfg),
                    parallelism=cfg.backend.parallelism,
                ).by_id()
                ds = LabeledDataset(
                    tuple(judged.get(e.trace.query.id, e) for e in ds.entries)
                )
        rows = score_dataset(
            ds,
            methods,
            scorer_context(cfg, backend),
            parallelism=cfg.backend.parallelism,
        )

    count = write_scores(rows, args.out)
    log.info("wrote %d score rows (%s) to %s", count, ",".join(methods), args.out)
    print(f"wrote {count} rows x {len(methods)} methods to {args.out}")
    return 0
