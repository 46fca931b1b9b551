# commands/longform.py
import argparse
import json
from pathlib import Path

import config
from backends.factory import build_backend
from commands._common import emit, prompts_for, scorer_context, split_csv
from data.dataset import load_dataset
from evaluation.longform import (
    STRATEGIES,
    build_labeler,
    decompose,
    evaluate_claims,
    label_claims,
    method_scorer,
    score_claims,
)
from helpers.logging_helper import get_logger

log = get_logger("cli.longform")


def register(subparsers) -> None:
    p = subparsers.add_parser("longform", help="claim-level scoring of long answers")
    p.add_argument("--in", dest="inp", required=True, help="dataset JSONL (greedy = long answer)")
    p.add_argument("--out", required=True, help="claims JSONL to write")
    p.add_argument("--strategies", default="naive,qg,qag", help="subset of naive,qg,qag")
    p.add_argument("--method", default="lns", help="method scoring each claim response")
    p.add_argument("--labels", help="labels file or module:attr (default: config)")
    p.add_argument("--report", help="PRR report file when claims are labeled")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    strategies = split_csv(args.strategies)
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown or not strategies:
        raise ValueError(f"unknown strategies {unknown or strategies}; pick from {STRATEGIES}")
    ds = load_dataset(args.inp)
    prompts = prompts_for(cfg)

    claims = []
    with build_backend(cfg) as backend:
        scorer = method_scorer(args.method, scorer_context(cfg, backend))
        for entry in ds:
            x = entry.trace.query
            texts = decompose(
                entry.trace.greedy.text, backend, prompts, cfg.longform.decompose_max_tokens
            )
            log.info("%s: %d claims", x.id, len(texts))
            claims.extend(
                score_claims(
                    x,
                    texts,
                    strategies,
                    scorer,
                    backend,
                    cfg.longform,
                    prompts=prompts,
                    parallelism=cfg.backend.parallelism,
                )
            )

    target = args.labels or cfg.longform.claim_labeler
    if target:
        claims = label_claims(claims, build_labeler(target))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as f:
        for c in claims:
            f.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")
    print(f"wrote {len(claims)} claim records to {out}")

    if target:
        emit(evaluate_claims(claims), args.report)
    return 0
