# data/dataset.py
import json
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, TypeVar

import config
from helpers.logging_helper import get_logger
from utility.trace_utils import (
    Generation,
    GenerationRole,
    GenerationTrace,
    LabeledDataset,
    LabeledTrace,
    QueryRecord,
    TokenEvent,
)

logger = get_logger("dataset")

T = TypeVar("T")

GENERATION_FIELDS = ("text", "tokens", "hidden", "attn")

# canonical line field order
FIELD_ORDER = (
    "id",
    "prompt",
    "ground_truths",
    "dataset_tag",
    "transform_tag",
    "greedy",
    "samples",
    "sampling",
    "paraphrases",
    "external_scores",
    "label",
)

# prerequisite names reported by validate_trace
_NEEDS_GREEDY_TOKENS = {"lns", "mars"}
_NEEDS_SAMPLES = {
    "entropy",
    "semantic_entropy",
    "sentsar",
    "sar",
    "degmat",
    "degmat_c",
    "sum_eigv",
    "eccentricity",
    "eccentricity_c",
    "kle",
}
_NEEDS_SAMPLE_TOKENS = {"entropy", "semantic_entropy", "sentsar", "sar"}
_EXTERNAL = {"lars", "saplma"}


class DatasetError(ValueError):
    """Malformed or inconsistent dataset file; line_no is 1-based when known."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{prefix}{message}")


#
# --- decode ---
#
def generation_from_dict(raw: Any, role: GenerationRole) -> Generation:
    if isinstance(raw, str):
        return Generation(text=raw, role=role)
    if not isinstance(raw, dict):
        raise ValueError(f"generation must be an object, got {type(raw).__name__}")
    tokens = tuple(
        TokenEvent(token_text=str(t["t"]), logprob=float(t["lp"]))
        for t in raw.get("tokens") or ()
    )
    return Generation(
        text=str(raw.get("text", "")),
        tokens=tokens,
        hidden_state=raw.get("hidden"),
        attention_diagonals=raw.get("attn"),
        role=role,
        extra={k: v for k, v in raw.items() if k not in GENERATION_FIELDS},
    )


def query_from_dict(raw: dict) -> QueryRecord:
    return QueryRecord(
        id=str(raw["id"]),
        prompt=str(raw["prompt"]),
        ground_truths=tuple(str(g) for g in raw.get("ground_truths") or ()),
        dataset_tag=str(raw.get("dataset_tag") or ""),
        transform_tag=raw.get("transform_tag"),
    )


def record_from_dict(raw: dict) -> LabeledTrace:
    """Build a LabeledTrace from one decoded line. Raises ValueError/KeyError on bad shape."""
    query = query_from_dict(raw)
    greedy = generation_from_dict(raw["greedy"], GenerationRole.GREEDY)
    samples = tuple(
        generation_from_dict(s, GenerationRole.SAMPLE) for s in raw.get("samples") or ()
    )

    sampling = raw.get("sampling") or {}
    temperature = float(sampling.get("temp", 1.0))
    declared_b = sampling.get("B")
    if declared_b is not None and int(declared_b) != len(samples):
        raise ValueError(
            f"sampling.B={declared_b} does not match {len(samples)} samples"
        )

    paraphrases = raw.get("paraphrases")
    if paraphrases is not None:
        paraphrases = tuple(
            generation_from_dict(p, GenerationRole.SAMPLE) for p in paraphrases
        )

    extra = {k: v for k, v in raw.items() if k not in FIELD_ORDER}
    trace = GenerationTrace(
        query=query,
        greedy=greedy,
        samples=samples,
        temperature=temperature,
        paraphrase_answers=paraphrases,
        external_scores={
            str(k): float(v) for k, v in (raw.get("external_scores") or {}).items()
        },
        extra=extra,
    )
    label = raw.get("label")
    return LabeledTrace(trace=trace, label=None if label is None else int(label))


def _read_records(p: Path, decode: Callable[[dict], T], ident: Callable[[T], str]) -> list[T]:
    out: list[T] = []
    seen: dict[str, int] = {}

    with p.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON: {e.msg}", line_no) from e
            if not isinstance(raw, dict):
                raise DatasetError("record must be a JSON object", line_no)
            try:
                item = decode(raw)
            except (KeyError, TypeError, ValueError) as e:
                raise DatasetError(f"invalid record: {e}", line_no) from e

            qid = ident(item)
            if qid in seen:
                raise DatasetError(
                    f"duplicate id {qid!r} (first seen on line {seen[qid]})", line_no
                )
            seen[qid] = line_no
            out.append(item)
    return out


def load_dataset(path: str | Path) -> LabeledDataset:
    p = Path(path)
    entries = _read_records(p, record_from_dict, lambda e: e.trace.query.id)
    logger.info("Loaded %d traces from %s", len(entries), p)
    return LabeledDataset(entries=tuple(entries))


def load_queries(path: str | Path) -> list[QueryRecord]:
    """Queries from a query file or a full dataset file (trace fields ignored)."""
    p = Path(path)
    queries = _read_records(p, query_from_dict, lambda q: q.id)
    logger.info("Loaded %d queries from %s", len(queries), p)
    return queries


#
# --- encode ---
#
def generation_to_dict(g: Generation) -> dict:
    out = {
        "text": g.text,
        "tokens": [{"t": t.token_text, "lp": t.logprob} for t in g.tokens],
        "hidden": list(g.hidden_state) if g.hidden_state is not None else None,
        "attn": (
            [list(head) for head in g.attention_diagonals]
            if g.attention_diagonals is not None
            else None
        ),
    }
    out.update(g.extra)
    return out


def query_to_dict(q: QueryRecord) -> dict:
    return {
        "id": q.id,
        "prompt": q.prompt,
        "ground_truths": list(q.ground_truths),
        "dataset_tag": q.dataset_tag,
        "transform_tag": q.transform_tag,
    }


def save_queries(queries: Iterable[QueryRecord], path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with p.open("w", encoding="utf-8", newline="\n") as f:
        for q in queries:
            f.write(json.dumps(query_to_dict(q), ensure_ascii=False))
            f.write("\n")
            count += 1
    logger.info("Wrote %d queries to %s", count, p)


def record_to_dict(entry: LabeledTrace) -> dict:
    t = entry.trace
    out = {
        **query_to_dict(t.query),
        "greedy": generation_to_dict(t.greedy),
        "samples": [generation_to_dict(s) for s in t.samples],
        "sampling": {"temp": t.temperature, "B": t.num_samples},
        "paraphrases": (
            [generation_to_dict(p) for p in t.paraphrase_answers]
            if t.paraphrase_answers is not None
            else None
        ),
        "external_scores": dict(t.external_scores),
        "label": entry.label,
    }
    out.update(t.extra)
    return out


def dumps_record(entry: LabeledTrace) -> str:
    return json.dumps(record_to_dict(entry), ensure_ascii=False)


def save_dataset(ds: LabeledDataset | Iterable[LabeledTrace], path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with p.open("w", encoding="utf-8", newline="\n") as f:
        for entry in ds:
            f.write(dumps_record(entry))
            f.write("\n")
            count += 1
    logger.info("Wrote %d traces to %s", count, p)


#
# --- prerequisite checks ---
#
def validate_trace(t: GenerationTrace, required: Iterable[str]) -> list[str]:
    """Report-style check: returns human-readable missing prerequisites (empty = ok)."""
    violations: list[str] = []
    req = {config.canonical_method_id(m) for m in required}

    def add(msg: str) -> None:
        if msg not in violations:
            violations.append(msg)

    if req & _NEEDS_GREEDY_TOKENS and not t.greedy.tokens:
        add("greedy tokens required")
    if req & _NEEDS_SAMPLES and not t.samples:
        add("samples required")
    if req & _NEEDS_SAMPLE_TOKENS and t.samples and any(not s.tokens for s in t.samples):
        add("sample tokens required")
    if "inside" in req:
        gens = list(t.samples) or [t.greedy]
        if any(g.hidden_state is None for g in gens):
            add("hidden_state required")
    if "attention_score" in req:
        diags = t.greedy.attention_diagonals
        if not diags:
            add("attention_diagonals required")
        elif any(v <= 0 for head in diags for v in head):
            add("attention_diagonals must be strictly positive")
    for method in sorted(req & _EXTERNAL):
        if method not in t.external_scores:
            add(f"external score {method!r} required")
    return violations
