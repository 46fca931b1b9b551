# commands/transform.py
import argparse

import config
from data.dataset import load_dataset, save_queries
from utility.transform_utils import (
    DEFAULT_ADVERSARIAL,
    TRANSFORM_KINDS,
    TransformSpec,
    apply_transform,
)


def register(subparsers) -> None:
    p = subparsers.add_parser("transform", help="write transformed copies of the queries")
    p.add_argument("--in", dest="inp", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="queries JSONL to write")
    p.add_argument("--kind", choices=TRANSFORM_KINDS, required=True)
    p.add_argument("--count", type=int, default=1, help="typos per prompt (1 or 2)")
    p.add_argument("--history", type=int, default=3, help="context history pairs")
    p.add_argument("--preset", choices=sorted(DEFAULT_ADVERSARIAL), default="short")
    p.add_argument("--text", help="custom adversarial prefix (overrides --preset)")
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.set_defaults(run=run)


def run(args: argparse.Namespace, cfg: config.RunConfig) -> int:
    spec = TransformSpec(
        kind=args.kind,
        history_pairs=args.history,
        typo_count=args.count,
        adversarial_text=args.text if args.text is not None else DEFAULT_ADVERSARIAL[args.preset],
    )
    pool = load_dataset(args.inp).traces
    out = [apply_transform(t.query, spec, pool=pool, seed=args.seed) for t in pool]
    save_queries(out, args.out)
    print(f"wrote {len(out)} {args.kind} queries to {args.out}")
    return 0
