# commands/collect.py
import argparse

import config
from backends.factory import build_backend
from commands._common import prompts_for
from data.dataset import load_queries, save_dataset
from evaluation.harness import collect_dataset, label_dataset
from helpers.logging_helper import get_logger
from utility.trace_utils import LabeledDataset, LabeledTrace

log = get_logger("cli.collect")


def register(subparsers) -> None:
    p = subparsers.add_parser("collect", help="sample greedy answers and samples per query")
    p.add_argument("--in", dest="inp", required=True, help="queries JSONL")
    p.add_argument("--out", required=True, help="dataset JSONL to write")
    p.add_argument("--paraphrases", action="store_true", help="also answer paraphrases")
    p.add_argument("--label", action="store_true", help="label greedy answers with the judge")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    queries = load_queries(args.inp)
    with build_backend(cfg) as backend:
        traces = collect_dataset(
            queries,
            backend,
            cfg.sampling,
            with_paraphrases=args.paraphrases,
            parallelism=cfg.backend.parallelism,
        )
        if args.label:
            ds = label_dataset(
                traces,
                backend,
                prompts=prompts_for(cfg),
                parallelism=cfg.backend.parallelism,
            )
        else:
            ds = LabeledDataset(tuple(LabeledTrace(t) for t in traces))
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} traces to {args.out}")
    return 0
