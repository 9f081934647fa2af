"""GPS event records, legs and geodesic helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from ..data import DataValidationError

KINDS = ("waypoint", "stay", "track")
EARTH_RADIUS_M = 6_371_008.8
SPEED_LIMIT_MS = 250.0 / 3.6  # impossible-speed and teleport threshold
WALK_LABELS = frozenset({"walk", "walking", "foot"})
EVENT_COLUMNS = ["person_id", "timestamp", "lat", "lon", "kind", "mode_label"]


@dataclass(frozen=True)
class GpsEvent:
    person_id: str
    timestamp: datetime
    lat: float
    lon: float
    kind: str
    mode_label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"event kind must be one of {KINDS}, got {self.kind!r}")
        if not (abs(self.lat) <= 90.0 and abs(self.lon) <= 180.0):
            raise ValueError(f"coordinates out of range: ({self.lat}, {self.lon})")

    @property
    def is_walk(self) -> bool:
        return self.kind == "track" and (self.mode_label or "").lower() in WALK_LABELS


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def distance_m(a: GpsEvent, b: GpsEvent) -> float:
    return haversine_m(a.lat, a.lon, b.lat, b.lon)


def elapsed_s(a: GpsEvent, b: GpsEvent) -> float:
    return (b.timestamp - a.timestamp).total_seconds()


def implied_speed(a: GpsEvent, b: GpsEvent) -> float:
    """Speed in m/s between two events; infinite when time does not advance but position does."""
    d = distance_m(a, b)
    dt = elapsed_s(a, b)
    if dt <= 0:
        return math.inf if d > 0 else 0.0
    return d / dt


def path_length_m(events: Sequence[GpsEvent]) -> float:
    return sum(distance_m(a, b) for a, b in zip(events, events[1:]))


@dataclass(frozen=True)
class Leg:
    """Maximal run of consecutive events sharing kind and mode label."""

    leg_id: str
    kind: str
    mode_label: str | None
    events: tuple[GpsEvent, ...]

    @property
    def first(self) -> GpsEvent:
        return self.events[0]

    @property
    def last(self) -> GpsEvent:
        return self.events[-1]

    @property
    def duration_s(self) -> float:
        return elapsed_s(self.first, self.last)

    @property
    def is_walk(self) -> bool:
        return self.first.is_walk

    @property
    def centroid(self) -> tuple[float, float]:
        n = len(self.events)
        return sum(e.lat for e in self.events) / n, sum(e.lon for e in self.events) / n


def segment_legs(events: Sequence[GpsEvent]) -> list[Leg]:
    """Split one person's ordered events into legs; ids are ``<person>-L<k>``."""
    legs: list[Leg] = []
    run: list[GpsEvent] = []

    def flush():
        if run:
            e = run[0]
            legs.append(Leg(f"{e.person_id}-L{len(legs)}", e.kind, e.mode_label, tuple(run)))

    for e in events:
        if run and (e.kind, e.mode_label) != (run[0].kind, run[0].mode_label):
            flush()
            run = []
        run.append(e)
    flush()
    return legs


def group_by_person(events: Iterable[GpsEvent]) -> dict[str, list[GpsEvent]]:
    out: dict[str, list[GpsEvent]] = {}
    for e in events:
        out.setdefault(e.person_id, []).append(e)
    return out


def load_events(path) -> dict[str, list[GpsEvent]]:
    """Read an events CSV into per-person lists in file order.

    Rows are validated together; all problems are raised at once.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(path, dtype={"person_id": str, "mode_label": str, "kind": str})
    missing = [c for c in EVENT_COLUMNS if c not in df.columns]
    if missing:
        raise DataValidationError([f"events: missing columns {missing}"])
    problems: list[str] = []
    events: list[GpsEvent] = []
    for i, r in enumerate(df.to_dict("records")):
        label = r.get("mode_label")
        label = None if label is None or (isinstance(label, float) and math.isnan(label)) else str(label).strip()
        try:
            events.append(GpsEvent(str(r["person_id"]), pd.Timestamp(r["timestamp"]).to_pydatetime(),
                                   float(r["lat"]), float(r["lon"]), str(r["kind"]).strip().lower(), label or None))
        except (ValueError, TypeError) as exc:
            problems.append(f"events row {i + 2}: {exc}")
    if problems:
        raise DataValidationError(problems)
    return group_by_person(events)


def write_events(events: Iterable[GpsEvent], path) -> None:
    rows = [{"person_id": e.person_id, "timestamp": e.timestamp.isoformat(), "lat": e.lat, "lon": e.lon,
             "kind": e.kind, "mode_label": e.mode_label or ""} for e in events]
    pd.DataFrame(rows, columns=EVENT_COLUMNS).to_csv(path, index=False, float_format="%.7f")


@dataclass(frozen=True)
class Trip:
    """One observed movement between two places, as consumed by the later pipeline stages."""

    trip_id: str
    person_id: str
    mode: str
    origin: tuple[float, float]
    destination: tuple[float, float]
    departure: datetime
    arrival: datetime
    distance_km: float
    purpose: str = "other"

    @property
    def duration_min(self) -> float:
        return (self.arrival - self.departure).total_seconds() / 60.0


def trip_from_leg(leg: Leg, purpose: str = "other") -> Trip:
    return Trip(leg.leg_id, leg.first.person_id, (leg.mode_label or "").lower(), (leg.first.lat, leg.first.lon),
                (leg.last.lat, leg.last.lon), leg.first.timestamp, leg.last.timestamp,
                path_length_m(leg.events) / 1000.0, purpose)
