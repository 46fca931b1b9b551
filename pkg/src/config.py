# config.py
import json
import os
import re
from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

load_dotenv()

ENVIRONMENT = os.getenv("ENVIRONMENT", "prod").lower()

DEFAULT_FMT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"
DEFAULT_DATEFMT = "%Y-%m-%d %H:%M:%S"

DEFAULT_PARALLELISM = int(os.getenv("UE_PARALLELISM", "8"))
DEFAULT_SEED = int(os.getenv("UE_SEED", "0"))

# reserved score for "infinite" uncertainty; sorts above every finite score
SATURATED = 1.7976931348623157e308

ALL_METHODS: tuple[str, ...] = (
    "lns",
    "mars",
    "entropy",
    "semantic_entropy",
    "sentsar",
    "sar",
    "lars",
    "saplma",
    "inside",
    "attention_score",
    "degmat",
    "degmat_c",
    "sum_eigv",
    "eccentricity",
    "eccentricity_c",
    "kle",
    "self_detection",
    "p_true",
    "verbalized_confidence",
)


_METHOD_ALIASES = {
    "lengthnormalizedscore": "lns",
    "ln": "lns",
    "ptrue": "p_true",
    "verbalized": "verbalized_confidence",
    "degreematrix": "degmat",
    "degreematrixc": "degmat_c",
    "eigenscore": "inside",
    "attention": "attention_score",
    "selfdetectionentropy": "self_detection",
    "kernellanguageentropy": "kle",
}


def canonical_method_id(name: str) -> str:
    """Map "SemanticEntropy", "semantic-entropy", "P(true)" etc. to the roster id."""
    squashed = re.sub(r"[^a-z0-9]", "", str(name).lower())
    for method in ALL_METHODS:
        if squashed == method.replace("_", ""):
            return method
    if squashed in _METHOD_ALIASES:
        return _METHOD_ALIASES[squashed]
    raise ValueError(f"unknown method id {name!r}")


class ConfigError(ValueError):
    """Raised when a run-config file is missing or invalid."""


class BackendConfig(BaseModel):
    kind: Literal["openai", "mock"] = "mock"
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    similarity_url: Optional[str] = None
    parallelism: int = Field(DEFAULT_PARALLELISM, ge=1)
    seed: int = DEFAULT_SEED
    timeout: float = Field(60.0, gt=0)
    max_retries: int = Field(3, ge=1)

    @property
    def api_key(self) -> Optional[str]:
        return os.getenv(self.api_key_env)


class ReplayConfig(BaseModel):
    path: Optional[str] = None
    mode: Literal["off", "record", "replay", "auto"] = "off"


class SamplingConfig(BaseModel):
    temperature: float = Field(1.0, ge=0)
    num_samples: int = Field(5, ge=0)
    num_paraphrases: int = Field(5, ge=1)
    max_tokens: int = Field(128, ge=1)


class ScoringConfig(BaseModel):
    methods: list[str] = Field(default_factory=lambda: list(ALL_METHODS))
    kle_temperature: float = Field(0.3, gt=0)
    eccentricity_k: int = Field(2, ge=0)
    eigv_threshold: float = 0.9
    sentsar_temperature: float = Field(1.0, gt=0)
    inside_alpha: float = Field(0.001, gt=0)
    attention_sign: Literal[1, -1] = 1
    entail_threshold: float = Field(0.5, ge=0, le=1)

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: list[str]) -> list[str]:
        return [canonical_method_id(m) for m in value]


class CalibrationConfig(BaseModel):
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    cal_size: Optional[int] = Field(None, ge=1)
    test_size: Optional[int] = Field(None, ge=1)
    threshold_mode: Literal["midpoint", "random"] = "midpoint"


class EnsembleConfig(BaseModel):
    cal_size: int = Field(100, ge=2)
    tree_max_depth: int = Field(3, ge=0)
    tree_min_leaf: int = Field(5, ge=1)
    linear_l2: float = Field(1e-3, ge=0)
    linear_iterations: int = Field(2000, ge=1)
    linear_lr: float = Field(1.0, gt=0)


class LongformConfig(BaseModel):
    num_questions: int = Field(5, ge=1)
    question_temperature: float = Field(1.0, ge=0)
    decompose_max_tokens: int = Field(1024, ge=1)
    question_max_tokens: int = Field(128, ge=1)
    answer_max_tokens: int = Field(128, ge=1)
    claim_labeler: Optional[str] = None


class RunConfig(BaseModel):
    backend: BackendConfig = Field(default_factory=BackendConfig)
    replay: ReplayConfig = Field(default_factory=ReplayConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    scoring: ScoringConfig = Field(default_factory=ScoringConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    longform: LongformConfig = Field(default_factory=LongformConfig)
    prompts_path: Optional[str] = None


def load_run_config(path: str | Path | None) -> RunConfig:
    """Read a JSON run-config; no path means all defaults."""
    if path is None:
        return RunConfig()

    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with p.open(encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {p}: {e}") from e

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {p}: {e}") from e
