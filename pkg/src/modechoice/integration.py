"""Composite integration index from four dimension scores.

Dimension weights are fixed (economic 0.4, social 0.3, civic 0.2,
health 0.1). Within a dimension, indicator responses are averaged with
respondent-supplied importance weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

DIMENSION_WEIGHTS = {"economic": 0.4, "social": 0.3, "civic": 0.2, "health": 0.1}

SCALE_MIN, SCALE_MAX = 1.0, 10.0


@dataclass(frozen=True)
class IntegrationDimensions:
    economic: float | None
    social: float | None
    civic: float | None
    health: float | None

    def __post_init__(self):
        for name in DIMENSION_WEIGHTS:
            v = getattr(self, name)
            if v is None:
                continue
            if not SCALE_MIN <= v <= SCALE_MAX:
                raise ValueError(f"{name} score {v} outside [1, 10]")

    @classmethod
    def from_mapping(cls, row) -> "IntegrationDimensions":
        def get(key):
            v = row.get(key)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return None
            return float(v)

        return cls(get("integ_econ"), get("integ_soc"), get("integ_civic"), get("integ_health"))


def dimension_score(indicator_values: Sequence[float], importance_weights: Sequence[float]) -> float:
    """Importance-weighted mean of indicator responses within one dimension."""
    if len(indicator_values) != len(importance_weights):
        raise ValueError("indicator values and importance weights differ in length")
    if len(indicator_values) == 0:
        raise ValueError("no indicators supplied")
    if any(w < 0 for w in importance_weights):
        raise ValueError("importance weights must be nonnegative")
    total = math.fsum(importance_weights)
    if total == 0:
        raise ValueError("importance weights are all zero")
    score = math.fsum(w * v for v, w in zip(indicator_values, importance_weights)) / total
    # guard against rounding drifting outside the convex hull
    return min(max(score, min(indicator_values)), max(indicator_values))


def composite_index_with_flag(dims: IntegrationDimensions) -> tuple[float, bool]:
    """Composite index and whether missing dimensions forced reweighting."""
    present = {k: getattr(dims, k) for k in DIMENSION_WEIGHTS if getattr(dims, k) is not None}
    if not present:
        raise ValueError("all integration dimensions missing")
    wsum = math.fsum(DIMENSION_WEIGHTS[k] for k in present)
    value = math.fsum(DIMENSION_WEIGHTS[k] * v for k, v in present.items()) / wsum
    return value, len(present) < len(DIMENSION_WEIGHTS)


def composite_index(dims: IntegrationDimensions) -> float:
    return composite_index_with_flag(dims)[0]
