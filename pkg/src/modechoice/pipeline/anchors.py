"""Home and work anchor inference from stay episodes."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .events import EARTH_RADIUS_M, GpsEvent, segment_legs

NIGHT_START = time(22, 0)
NIGHT_END = time(7, 0)
DAY_START = time(9, 0)
DAY_END = time(17, 0)
DAY_ROLLOVER_H = 3  # a travel day runs 03:00 to 03:00
REGULARITY_SPREAD_H = 4.0


@dataclass(frozen=True)
class StayEpisode:
    person_id: str
    lat: float
    lon: float
    start: datetime
    end: datetime


@dataclass(frozen=True)
class AnchorConfig:
    min_days: int = 7
    radius_m: float = 150.0
    min_stays: int = 3
    home_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)  # night hours, nights, first/last stop
    work_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)  # weekday hours, workdays, arrival regularity
    min_work_score: float = 0.3
    min_workdays: int = 3


@dataclass(frozen=True)
class Anchor:
    lat: float
    lon: float
    score: float
    n_stays: int
    components: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AnchorResult:
    home: Anchor | None
    work: Anchor | None
    flags: tuple[str, ...] = ()


def stay_episodes(events: Sequence[GpsEvent]) -> list[StayEpisode]:
    """One episode per stay leg, located at the leg centroid."""
    out = []
    for leg in segment_legs(events):
        if leg.kind == "stay":
            lat, lon = leg.centroid
            out.append(StayEpisode(leg.first.person_id, lat, lon, leg.first.timestamp, leg.last.timestamp))
    return out


def _overlap_h(a0: datetime, a1: datetime, b0: datetime, b1: datetime) -> float:
    return max(0.0, (min(a1, b1) - max(a0, b0)).total_seconds() / 3600.0)


def _nights(ep: StayEpisode) -> dict[date, float]:
    """Hours of ``ep`` inside each night window, keyed by the date the night starts."""
    out = {}
    d = ep.start.date() - timedelta(days=1)
    while d <= ep.end.date():
        w0 = datetime.combine(d, NIGHT_START)
        w1 = datetime.combine(d + timedelta(days=1), NIGHT_END)
        h = _overlap_h(ep.start, ep.end, w0, w1)
        if h > 0:
            out[d] = h
        d += timedelta(days=1)
    return out


def _workday_hours(ep: StayEpisode) -> dict[date, float]:
    out = {}
    d = ep.start.date()
    while d <= ep.end.date():
        if d.weekday() < 5:
            h = _overlap_h(ep.start, ep.end, datetime.combine(d, DAY_START), datetime.combine(d, DAY_END))
            if h > 0:
                out[d] = h
        d += timedelta(days=1)
    return out


def _travel_day(t: datetime) -> date:
    return (t - timedelta(hours=DAY_ROLLOVER_H)).date()


def _share(part: float, whole: float) -> float:
    return part / whole if whole > 0 else 0.0


def infer_anchors(episodes: Sequence[StayEpisode], config: AnchorConfig | None = None) -> AnchorResult:
    """Locate home and work among density clusters of stay episodes.

    Home is the cluster with the highest night score. Work is the best
    weekday-daytime cluster other than home, kept only when its score and
    number of distinct workdays reach the configured minimums.
    """
    cfg = config or AnchorConfig()
    eps = sorted(episodes, key=lambda e: e.start)
    if not eps:
        return AnchorResult(None, None, ("insufficient stays: none recorded",))
    span = (eps[-1].end.date() - eps[0].start.date()).days + 1
    if span < cfg.min_days or len(eps) < cfg.min_stays:
        return AnchorResult(None, None, (f"insufficient stays: {len(eps)} episodes over {span} days",))

    coords = np.radians([[e.lat, e.lon] for e in eps])
    labels = DBSCAN(eps=cfg.radius_m / EARTH_RADIUS_M, min_samples=cfg.min_stays, metric="haversine",
                    algorithm="ball_tree").fit_predict(coords)
    clusters = sorted(set(labels) - {-1})
    if not clusters:
        return AnchorResult(None, None, ("insufficient stays: no dense cluster",))

    night = [_nights(e) for e in eps]
    work = [_workday_hours(e) for e in eps]
    all_night_h = sum(sum(n.values()) for n in night)
    all_nights = {d for n in night for d in n}
    all_work_h = sum(sum(w.values()) for w in work)
    all_workdays = {d for w in work for d in w}

    # first and last stop of every travel day
    by_day: dict[date, list[int]] = {}
    for i, e in enumerate(eps):
        d0, d1 = _travel_day(e.start), _travel_day(e.end)
        d = d0
        while d <= d1:
            by_day.setdefault(d, []).append(i)
            d += timedelta(days=1)
    edge_hits = np.zeros(len(eps))
    for members in by_day.values():
        edge_hits[members[0]] += 1
        edge_hits[members[-1]] += 1
    n_edges = 2 * len(by_day)

    def members(c):
        return [i for i, lab in enumerate(labels) if lab == c]

    def centre(idx):
        return float(np.mean([eps[i].lat for i in idx])), float(np.mean([eps[i].lon for i in idx]))

    home_scores = {}
    for c in clusters:
        idx = members(c)
        parts = (
            _share(sum(sum(night[i].values()) for i in idx), all_night_h),
            _share(len({d for i in idx for d in night[i]}), len(all_nights)),
            _share(float(edge_hits[idx].sum()), n_edges),
        )
        home_scores[c] = (sum(w * p for w, p in zip(cfg.home_weights, parts)), parts)

    flags: list[str] = []
    home_c = max(clusters, key=lambda c: (home_scores[c][0], -c))
    home = None
    if home_scores[home_c][0] > 0 and home_scores[home_c][1][0] > 0:
        idx = members(home_c)
        score, parts = home_scores[home_c]
        home = Anchor(*centre(idx), score, len(idx), dict(zip(("night_hours", "nights", "first_last"), parts)))
    else:
        flags.append("home undefined: no night-time presence")
        home_c = None

    best, best_score = None, -math.inf
    for c in clusters:
        if c == home_c:
            continue
        idx = members(c)
        days = {d for i in idx for d in work[i]}
        arrivals = [eps[i].start.hour + eps[i].start.minute / 60.0 for i in idx if work[i]]
        spread = statistics.pstdev(arrivals) if len(arrivals) > 1 else 0.0
        parts = (
            _share(sum(sum(work[i].values()) for i in idx), all_work_h),
            _share(len(days), len(all_workdays)),
            max(0.0, 1.0 - spread / REGULARITY_SPREAD_H) if arrivals else 0.0,
        )
        score = sum(w * p for w, p in zip(cfg.work_weights, parts))
        if len(days) >= cfg.min_workdays and score >= cfg.min_work_score and score > best_score:
            best, best_score = Anchor(*centre(idx), score, len(idx),
                                      dict(zip(("weekday_hours", "workdays", "regularity"), parts))), score
    if best is None:
        flags.append("work undefined: no regular weekday daytime cluster")
    return AnchorResult(home, best, tuple(flags))


def anchors_from_events(events: Sequence[GpsEvent], config: AnchorConfig | None = None) -> AnchorResult:
    return infer_anchors(stay_episodes(events), config)
