"""Trajectory plausibility screening."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .events import SPEED_LIMIT_MS, GpsEvent, implied_speed, segment_legs

IMPOSSIBLE_SPEED = "impossible_speed"
ZERO_VARIANCE = "zero_variance"
NON_MONOTONE_TIME = "non_monotone_time"
EMPTY_RECORD = "empty_record"
ZERO_VARIANCE_MIN_RUN = 3


@dataclass
class ScreeningReport:
    hits: dict[str, Counter] = field(default_factory=dict)
    rejected: list[str] = field(default_factory=list)

    def add(self, person_id: str, rule: str, n: int = 1) -> None:
        if n:
            self.hits.setdefault(person_id, Counter())[rule] += n

    def to_dict(self) -> dict:
        return {"hits": {p: dict(c) for p, c in self.hits.items()}, "rejected": list(self.rejected)}


def _drop_non_monotone(events: Sequence[GpsEvent]) -> tuple[list[GpsEvent], int]:
    kept: list[GpsEvent] = []
    for e in events:
        if kept and e.timestamp <= kept[-1].timestamp:
            continue
        kept.append(e)
    return kept, len(events) - len(kept)


def _speed_filter(events: list[GpsEvent], limit: float) -> tuple[list[GpsEvent], int]:
    """Remove isolated spikes and any moving leg containing an impossible jump.

    A spike is an event unreachable from the previous kept event and from
    which the next event is also unreachable. A jump reachable onward but
    not from behind is kept when it falls between legs (a recording gap),
    and removes the whole leg when it happens inside one moving leg.
    """
    hits = 0
    kept: list[GpsEvent] = []
    for i, e in enumerate(events):
        if not kept or implied_speed(kept[-1], e) <= limit:
            kept.append(e)
            continue
        nxt = events[i + 1] if i + 1 < len(events) else None
        if nxt is None or implied_speed(e, nxt) > limit:
            hits += 1  # spike
            continue
        kept.append(e)
    # jumps that survived the spike pass
    bad_legs: set[str] = set()
    legs = segment_legs(kept)
    for leg in legs:
        if leg.kind == "stay":
            continue
        if any(implied_speed(a, b) > limit for a, b in zip(leg.events, leg.events[1:])):
            bad_legs.add(leg.leg_id)
    if bad_legs:
        hits += len(bad_legs)
        kept = [e for leg in legs if leg.leg_id not in bad_legs for e in leg.events]
    return kept, hits


def _drop_zero_variance(events: list[GpsEvent], min_run: int) -> tuple[list[GpsEvent], int]:
    """Remove runs of ``min_run`` or more consecutive moving events at one exact coordinate."""
    out: list[GpsEvent] = []
    hits = 0
    i = 0
    while i < len(events):
        e = events[i]
        j = i + 1
        if e.kind != "stay":
            while j < len(events) and events[j].kind != "stay" and (events[j].lat, events[j].lon) == (e.lat, e.lon):
                j += 1
            if j - i >= min_run:
                hits += 1
                i = j
                continue
            j = i + 1
        out.append(e)
        i = j
    return out, hits


def screen_person(events: Sequence[GpsEvent], report: ScreeningReport, person_id: str,
                  speed_limit: float = SPEED_LIMIT_MS) -> list[GpsEvent]:
    clean, n = _drop_non_monotone(events)
    report.add(person_id, NON_MONOTONE_TIME, n)
    clean, n = _drop_zero_variance(clean, ZERO_VARIANCE_MIN_RUN)
    report.add(person_id, ZERO_VARIANCE, n)
    clean, n = _speed_filter(clean, speed_limit)
    report.add(person_id, IMPOSSIBLE_SPEED, n)
    return clean


def screen_trajectories(events_by_person: Mapping[str, Sequence[GpsEvent]],
                        speed_limit: float = SPEED_LIMIT_MS) -> tuple[dict[str, list[GpsEvent]], ScreeningReport]:
    """Filter implausible events per person.

    Returns the cleaned events of every retained person and a report of rule
    hits. Persons left without a single moving leg are rejected.
    """
    report = ScreeningReport()
    clean: dict[str, list[GpsEvent]] = {}
    for pid, events in events_by_person.items():
        kept = screen_person(events, report, pid, speed_limit)
        if not any(e.kind == "track" for e in kept):
            report.add(pid, EMPTY_RECORD)
            report.rejected.append(pid)
            continue
        clean[pid] = kept
    return clean, report
