# commands/search.py
import argparse
import json
from pathlib import Path

import config
from backends.factory import build_backend
from commands._common import prompts_for, scorer_context, split_csv
from data.dataset import load_dataset
from evaluation.adversarial import DEFAULT_PROBES, adversarial_search, make_evaluator
from helpers.logging_helper import get_logger
from scorers.registry import resolve_methods

log = get_logger("cli.search")


def register(subparsers) -> None:
    p = subparsers.add_parser("search", help="search an adversarial instruction prefix")
    p.add_argument("--in", dest="inp", required=True, help="training dataset JSONL")
    p.add_argument("--probes", default=",".join(DEFAULT_PROBES))
    p.add_argument("--iterations", type=int, default=15)
    p.add_argument("--budget", type=float, default=0.0, help="allowed accuracy drop")
    p.add_argument("--out", required=True, help="JSON with the best prompt and history")
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    probes = resolve_methods(split_csv(args.probes))
    train = load_dataset(args.inp)
    with build_backend(cfg) as backend:
        evaluate = make_evaluator(
            train, probes, backend, scorer_context(cfg, backend), cfg.sampling
        )
        result = adversarial_search(
            evaluate,
            backend,
            args.iterations,
            accuracy_budget=args.budget,
            prompts=prompts_for(cfg),
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "best_prompt": result.best.prompt,
        "history": [
            {"prompt": h.prompt, "prr": dict(h.prr), "accuracy": h.accuracy}
            for h in result.history
        ],
    }
    out.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    log.info("best prompt mean PRR %.3f", result.best.mean_prr)
    print(result.best.prompt or "(initial prompt)")
    return 0
