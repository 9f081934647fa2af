"""Spatial-temporal trip clusters used to share routing queries."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, time
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from .events import Trip, haversine_m

# (name, first minute of day) in ascending order
PERIOD_STARTS = (
    ("night", 0),
    ("am_peak", 6 * 60 + 30),
    ("midday", 9 * 60 + 30),
    ("pm_peak", 15 * 60 + 30),
    ("evening", 18 * 60 + 30),
)
PERIOD_NAMES = tuple(name for name, _ in PERIOD_STARTS)


def round_half_up(x: float, places: int) -> float:
    """Round halves away from zero, working on the shortest decimal text of ``x``."""
    return float(Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def round3(x: float) -> float:
    return round_half_up(x, 3)


def period_of(t: datetime | time) -> str:
    minute = t.hour * 60 + t.minute
    name = PERIOD_STARTS[0][0]
    for n, start in PERIOD_STARTS:
        if minute >= start:
            name = n
    return name


@dataclass(frozen=True, order=True)
class ClusterKey:
    origin_lat3: float
    origin_lon3: float
    dest_lat3: float
    dest_lon3: float
    period: str

    def __post_init__(self):
        if self.period not in PERIOD_NAMES:
            raise ValueError(f"unknown period {self.period!r}")

    @classmethod
    def of(cls, origin: tuple[float, float], destination: tuple[float, float], departure: datetime) -> "ClusterKey":
        return cls(round3(origin[0]), round3(origin[1]), round3(destination[0]), round3(destination[1]),
                   period_of(departure))

    @property
    def token(self) -> str:
        """Stable text form, used as a cache key and in seeds."""
        return (f"{self.origin_lat3:.3f},{self.origin_lon3:.3f}>"
                f"{self.dest_lat3:.3f},{self.dest_lon3:.3f}@{self.period}")

    @property
    def crow_km(self) -> float:
        return haversine_m(self.origin_lat3, self.origin_lon3, self.dest_lat3, self.dest_lon3) / 1000.0


def cluster_trips(trips: Iterable[Trip]) -> dict[str, ClusterKey]:
    """Map each trip id to its cluster key."""
    return {t.trip_id: ClusterKey.of(t.origin, t.destination, t.departure) for t in trips}
