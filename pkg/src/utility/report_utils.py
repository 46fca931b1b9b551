# utility/report_utils.py
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

REPORT_COLUMNS: tuple[str, ...] = ("method", "cal_set", "metric", "mean", "sd", "seed_count")


@dataclass(frozen=True, slots=True)
class ReportRow:
    method: str
    cal_set: str
    metric: str
    mean: float
    sd: float = 0.0
    seed_count: int = 1

    def __post_init__(self):
        if not self.method:
            raise ValueError("method must be non-empty.")
        if not self.metric:
            raise ValueError("metric must be non-empty.")
        if self.seed_count < 1:
            raise ValueError("seed_count must be >= 1.")
        if math.isnan(self.mean) or math.isnan(self.sd) or self.sd < 0:
            raise ValueError(f"invalid mean/sd for {self.method}: {self.mean}, {self.sd}")

    @classmethod
    def from_values(
        cls, method: str, cal_set: str, metric: str, values: Sequence[float]
    ) -> "ReportRow":
        """Mean and population sd over per-seed values."""
        if not values:
            raise ValueError("no values to summarize.")
        arr = np.asarray(values, dtype=float)
        return cls(
            method=method,
            cal_set=cal_set,
            metric=metric,
            mean=float(arr.mean()),
            sd=float(arr.std(ddof=0)),
            seed_count=len(arr),
        )

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ReportRow":
        missing = [c for c in REPORT_COLUMNS if c not in raw or raw[c] in (None, "")]
        # cal_set may legitimately be blank
        missing = [c for c in missing if c != "cal_set"]
        if missing:
            raise ValueError(f"report row missing {', '.join(missing)}")
        return cls(
            method=str(raw["method"]),
            cal_set=str(raw.get("cal_set") or ""),
            metric=str(raw["metric"]),
            mean=float(raw["mean"]),
            sd=float(raw["sd"]),
            seed_count=int(raw["seed_count"]),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def sort_rows(rows: Iterable[ReportRow]) -> list[ReportRow]:
    """Stable order: metric, then cal_set, keeping method order within a block."""
    return sorted(rows, key=lambda r: (r.metric, r.cal_set))
