"""Out-of-pocket trip cost by mode."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from ..alternatives import ACTIVE_MODES, TRANSIT_MODES, Mode

CAR_RATE_PER_KM = 0.75
DEFAULT_FARE = 3.50


def transit_fare(agencies: Iterable[str] = (), fare_table: Mapping[str, float] | None = None,
                 provider_fare: float | None = None, default_fare: float = DEFAULT_FARE) -> float:
    """Provider fare when given, else the highest single-agency fare; unknown agencies cost ``default_fare``."""
    if provider_fare is not None and math.isfinite(provider_fare) and provider_fare >= 0:
        return float(provider_fare)
    table = fare_table or {}
    fares = [float(table.get(a, default_fare)) for a in agencies]
    return max(fares) if fares else default_fare


def estimate_cost(mode: Mode | str, distance_km: float = 0.0, agencies: Iterable[str] = (),
                  fare_table: Mapping[str, float] | None = None, provider_fare: float | None = None) -> float:
    """Cost in CAD of one trip; finite and nonnegative for every mode."""
    m = Mode.parse(mode)
    if m in ACTIVE_MODES:
        return 0.0
    if m is Mode.CAR:
        if not (math.isfinite(distance_km) and distance_km >= 0):
            raise ValueError(f"car distance must be finite and nonnegative, got {distance_km}")
        return CAR_RATE_PER_KM * distance_km
    if m in TRANSIT_MODES:
        return transit_fare(agencies, fare_table, provider_fare)
    raise ValueError(f"no cost rule for {m.value}")
