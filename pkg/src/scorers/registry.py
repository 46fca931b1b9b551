# scorers/registry.py
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import config
from data.dataset import validate_trace
from helpers.logging_helper import get_logger
from scorers import consistency, internal, sequence
from scorers.base import ScorerContext, ScorerInputError
from utility.trace_utils import GenerationTrace, UncertaintyScore

logger = get_logger("scorers.registry")

Family = Literal["probability", "internal", "consistency", "self_check", "external"]
ScoreFn = Callable[[GenerationTrace, ScorerContext], float]


@dataclass(frozen=True, slots=True)
class MethodSpec:
    id: str
    family: Family
    fn: ScoreFn
    needs_backend: bool = False
    supervised: bool = False
    # value stored is a decreasing map of a raw confidence
    confidence_style: bool = False


def _mars(t, ctx):
    weights = sequence.token_importance_weights(
        t.query.prompt, t.greedy, ctx.require_backend("mars")
    )
    return sequence.weighted_lns(t.greedy, weights)


def _graph_all(t, ctx):
    return consistency.build_graph(ctx.full_matrix(t))


def _graph_samples(t, ctx):
    return consistency.build_graph(ctx.sample_matrix(t))


def _ecc_k(graph, ctx) -> int:
    return min(graph.size, ctx.settings.eccentricity_k)


def _eccentricity(t, ctx):
    g = _graph_samples(t, ctx)
    return consistency.eccentricity(g, _ecc_k(g, ctx), ctx.settings.eigv_threshold)


def _eccentricity_c(t, ctx):
    g = _graph_all(t, ctx)
    return consistency.eccentricity_c(g, 0, _ecc_k(g, ctx), ctx.settings.eigv_threshold)


def _self_detection(t, ctx):
    return consistency.self_detection(
        t,
        ctx.require_backend("self_detection"),
        ctx.prompts,
        n_q=ctx.sampling.num_paraphrases,
        threshold=ctx.settings.entail_threshold,
        max_tokens=ctx.sampling.max_tokens,
    )


_SPECS = (
    MethodSpec("lns", "probability", lambda t, ctx: sequence.lns(t.greedy)),
    MethodSpec("mars", "probability", _mars, needs_backend=True),
    MethodSpec("entropy", "probability", lambda t, ctx: sequence.mc_entropy(t)),
    MethodSpec(
        "semantic_entropy",
        "probability",
        lambda t, ctx: sequence.semantic_entropy(
            t, ctx.sample_matrix(t), ctx.settings.entail_threshold
        ),
        needs_backend=True,
    ),
    MethodSpec(
        "sentsar",
        "probability",
        lambda t, ctx: sequence.sentsar(
            t, ctx.sample_matrix(t), ctx.settings.sentsar_temperature
        ),
        needs_backend=True,
    ),
    MethodSpec(
        "sar",
        "probability",
        lambda t, ctx: sequence.sar(
            t,
            ctx.sample_matrix(t),
            ctx.require_backend("sar"),
            ctx.settings.sentsar_temperature,
        ),
        needs_backend=True,
    ),
    MethodSpec(
        "lars",
        "external",
        lambda t, ctx: sequence.external_score(t, "lars"),
        supervised=True,
        confidence_style=True,
    ),
    MethodSpec(
        "saplma",
        "external",
        lambda t, ctx: sequence.external_score(t, "saplma"),
        supervised=True,
        confidence_style=True,
    ),
    MethodSpec(
        "inside",
        "internal",
        lambda t, ctx: internal.inside_eigenscore(
            internal.HiddenMatrix.from_trace(t, ctx.settings.inside_alpha)
        ),
    ),
    MethodSpec(
        "attention_score",
        "internal",
        lambda t, ctx: internal.attention_score(t.greedy, ctx.settings.attention_sign),
    ),
    MethodSpec(
        "degmat",
        "consistency",
        lambda t, ctx: consistency.degmat(_graph_samples(t, ctx)),
        needs_backend=True,
    ),
    MethodSpec(
        "degmat_c",
        "consistency",
        lambda t, ctx: consistency.degmat_c(_graph_all(t, ctx), 0),
        needs_backend=True,
        confidence_style=True,
    ),
    MethodSpec(
        "sum_eigv",
        "consistency",
        lambda t, ctx: consistency.sum_eigv(_graph_samples(t, ctx)),
        needs_backend=True,
    ),
    MethodSpec("eccentricity", "consistency", _eccentricity, needs_backend=True),
    MethodSpec(
        "eccentricity_c",
        "consistency",
        _eccentricity_c,
        needs_backend=True,
        confidence_style=True,
    ),
    MethodSpec(
        "kle",
        "consistency",
        lambda t, ctx: consistency.kle(_graph_samples(t, ctx), ctx.settings.kle_temperature),
        needs_backend=True,
    ),
    MethodSpec("self_detection", "consistency", _self_detection, needs_backend=True),
    MethodSpec(
        "p_true",
        "self_check",
        lambda t, ctx: sequence.p_true(t, ctx.require_backend("p_true"), ctx.prompts),
        needs_backend=True,
        confidence_style=True,
    ),
    MethodSpec(
        "verbalized_confidence",
        "self_check",
        lambda t, ctx: sequence.verbalized_confidence(
            t, ctx.require_backend("verbalized_confidence"), ctx.prompts
        ),
        needs_backend=True,
        confidence_style=True,
    ),
)

METHODS: dict[str, MethodSpec] = {s.id: s for s in _SPECS}


def get_method(name: str) -> MethodSpec:
    return METHODS[config.canonical_method_id(name)]


def resolve_methods(names: Iterable[str]) -> list[str]:
    out: list[str] = []
    for n in names:
        mid = config.canonical_method_id(n)
        if mid not in out:
            out.append(mid)
    return out


def unsupervised(names: Iterable[str]) -> list[str]:
    return [n for n in resolve_methods(names) if not METHODS[n].supervised]


def score_trace(
    t: GenerationTrace, methods: Iterable[str], ctx: ScorerContext
) -> dict[str, UncertaintyScore]:
    """Score one trace with each method; prerequisite gaps raise ScorerInputError."""
    ids = resolve_methods(methods)
    problems = validate_trace(t, ids)
    if problems:
        raise ScorerInputError(f"trace {t.query.id!r}: {'; '.join(problems)}")

    out: dict[str, UncertaintyScore] = {}
    for mid in ids:
        spec = METHODS[mid]
        try:
            out[mid] = UncertaintyScore(method=mid, value=float(spec.fn(t, ctx)))
        except ValueError:
            logger.error("%s failed on trace %s", mid, t.query.id)
            raise
    logger.debug("scored %s with %d methods", t.query.id, len(out))
    return out
