# loader.py
import json
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from string import Formatter
from typing import Dict, Optional

from helpers.logging_helper import get_logger

# allowed placeholders per template; the first set is required
TEMPLATE_FIELDS: Dict[str, tuple[set[str], set[str]]] = {
    "p_true": (
        {"question", "generated_text"},
        {"question", "sampled_generations", "generated_text"},
    ),
    "verbalized_confidence": (
        {"question", "generated_text"},
        {"question", "generated_text"},
    ),
    "paraphrase": ({"question"}, {"question", "previous_questions"}),
    "decompose_step1": ({"text"}, {"text"}),
    "decompose_step2": ({"text"}, {"text"}),
    "question_generation": ({"claim"}, {"main_question", "claim"}),
    "claim_answer": ({"question"}, {"question"}),
    "prompt_tune": ({"history"}, {"history"}),
    "judge": ({"question", "answer"}, {"question", "ground_truths", "answer"}),
}

JSON_LOCATIONS = [
    Path(__file__).parent / "data" / "prompt_templates.json",
    Path.cwd() / "prompt_templates.json",
]

log = get_logger("loader")


class PromptAssetError(ValueError):
    """Prompt file missing, unreadable, or lacking a required template."""


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    name: str
    user: str
    system: Optional[str] = None

    def __post_init__(self):
        if not self.user.strip():
            raise ValueError(f"prompt {self.name!r}: user text cannot be empty.")

    @property
    def fields(self) -> set[str]:
        return _extract_fields(self.user) | _extract_fields(self.system or "")

    def render(self, **variables) -> list[tuple[str, str]]:
        """Fill placeholders and return chat messages as (role, text) pairs."""
        messages: list[tuple[str, str]] = []
        if self.system:
            messages.append(("system", self.system.format(**variables)))
        messages.append(("user", self.user.format(**variables)))
        return messages


def _extract_fields(template: str) -> set:
    return {f for _, f, _, _ in Formatter().parse(template) if f}


def _validate_template(name: str, text: str) -> str:
    required, allowed = TEMPLATE_FIELDS.get(name, (set(), None))
    fields = _extract_fields(text)

    for f in sorted(required - fields):
        text += f" {{{f}}}"
        log.info("prompt template fix (%s): appended missing {%s}", name, f)

    if allowed is not None:
        for f in sorted(fields - allowed):
            text = text.replace("{" + f + "}", "")
            log.info("prompt template fix (%s): removed unknown {%s}", name, f)

    return text


def _env_overrides(raw: Dict[str, dict]) -> Dict[str, dict]:
    # PROMPT_<NAME>=... replaces that template's user text
    for key, val in os.environ.items():
        if not key.startswith("PROMPT_"):
            continue
        name = key.split("PROMPT_", 1)[1].strip().lower()
        if name in TEMPLATE_FIELDS:
            entry = dict(raw.get(name) or {})
            entry["user"] = val
            raw[name] = entry
            log.info("prompt %s overridden from environment", name)
    return raw


def _find_json_file(path: str | Path | None) -> Path:
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise PromptAssetError(f"prompt file not found: {p}")
        return p
    for candidate in JSON_LOCATIONS:
        if candidate.exists():
            log.debug("prompt templates file: %s", candidate)
            return candidate
    raise PromptAssetError("prompt_templates.json not found")


def load_prompt_templates(path: str | Path | None = None) -> Dict[str, PromptTemplate]:
    p = _find_json_file(path)
    try:
        with p.open(encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise PromptAssetError(f"invalid prompt JSON at {p}: {e}") from e

    raw = _env_overrides({str(k): v for k, v in raw.items()})

    templates: Dict[str, PromptTemplate] = {}
    for name, entry in raw.items():
        if isinstance(entry, str):
            entry = {"user": entry}
        user = _validate_template(name, str(entry.get("user") or "").strip())
        system = entry.get("system")
        templates[name] = PromptTemplate(name=name, user=user, system=system)

    missing = sorted(set(TEMPLATE_FIELDS) - set(templates))
    if missing:
        raise PromptAssetError(f"missing prompt templates: {', '.join(missing)}")
    return templates


@lru_cache(maxsize=4)
def get_templates(path: Optional[str] = None) -> Dict[str, PromptTemplate]:
    """Memoized load_prompt_templates; env overrides are read on first use."""
    return load_prompt_templates(path)
