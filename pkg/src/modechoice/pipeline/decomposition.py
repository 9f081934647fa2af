"""Split an observed transit journey into access walk, platform wait, in-vehicle and egress walk."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .events import SPEED_LIMIT_MS, GpsEvent, Leg, distance_m, elapsed_s, implied_speed, segment_legs

MAX_LINK_DISTANCE_M = 250.0
MAX_LINK_GAP_S = 25 * 60.0


@dataclass(frozen=True)
class LinkRules:
    max_distance_m: float = MAX_LINK_DISTANCE_M
    max_gap_s: float = MAX_LINK_GAP_S
    speed_limit: float = SPEED_LIMIT_MS


@dataclass(frozen=True)
class TransitDecomposition:
    """Journey components in minutes; they sum to the linked journey duration."""

    access_walk: float
    platform_wait: float
    in_vehicle: float
    egress_walk: float
    teleport_detected: bool = False
    absorbed_walk_ids: tuple[str, ...] = field(default_factory=tuple)
    start: GpsEvent | None = None  # first and last linked events
    end: GpsEvent | None = None

    @property
    def total(self) -> float:
        return self.access_walk + self.platform_wait + self.in_vehicle + self.egress_walk

    @property
    def out_of_vehicle(self) -> float:
        return self.access_walk + self.platform_wait + self.egress_walk


def _transition(a: GpsEvent, b: GpsEvent, rules: LinkRules) -> str:
    """'ok', 'teleport' or 'break' for the step from ``a`` to ``b``."""
    if implied_speed(a, b) > rules.speed_limit:
        return "teleport"
    if distance_m(a, b) > rules.max_distance_m or elapsed_s(a, b) > rules.max_gap_s:
        return "break"
    return "ok"


def _teleport_free_tail(events: Sequence[GpsEvent], rules: LinkRules) -> int:
    """Index of the earliest event reachable backward from the last one without a teleport."""
    i = len(events) - 1
    while i > 0 and implied_speed(events[i - 1], events[i]) <= rules.speed_limit:
        i -= 1
    return i


def _teleport_free_head(events: Sequence[GpsEvent], rules: LinkRules) -> int:
    """Index of the latest event reachable forward from the first one without a teleport."""
    i = 0
    while i < len(events) - 1 and implied_speed(events[i], events[i + 1]) <= rules.speed_limit:
        i += 1
    return i


def _locate(legs: list[Leg], track: Leg | GpsEvent) -> int:
    target = track.first if isinstance(track, Leg) else track
    for k, leg in enumerate(legs):
        if leg.first == target:
            return k
    raise ValueError("transit track not found in the event stream")


def decompose_transit_journey(events: Sequence[GpsEvent], transit_track: Leg | GpsEvent,
                              rules: LinkRules | None = None) -> TransitDecomposition:
    """Decompose the journey around ``transit_track`` (a leg or its boarding event).

    Walking backward from boarding, a stay directly before boarding counts
    as platform wait when it lasts at most the gap limit, then walk legs are
    linked as access. Walking forward from alighting, walk legs are linked
    as egress. Every linked transition must respect the distance and gap
    limits; a teleport ends the scan at that point and sets the flag.

    Wait is the linked time before boarding not covered by access walking,
    and egress runs to the end of the last linked walk, so the four
    components always add up to the linked journey duration.
    """
    rules = rules or LinkRules()
    legs = segment_legs(events)
    k = _locate(legs, transit_track)
    track = legs[k]
    boarding, alighting = track.first, track.last
    teleport = any(implied_speed(a, b) > rules.speed_limit for a, b in zip(track.events, track.events[1:]))
    absorbed: list[str] = []

    # backward: optional platform stay, then access walks
    cursor = boarding
    access_s = 0.0
    j = k - 1
    if j >= 0 and legs[j].kind == "stay":
        stay = legs[j]
        step = _transition(stay.last, cursor, rules)
        inner_ok = all(implied_speed(a, b) <= rules.speed_limit for a, b in zip(stay.events, stay.events[1:]))
        if step == "teleport" or not inner_ok:
            teleport = True
        elif step == "ok" and elapsed_s(stay.first, boarding) <= rules.max_gap_s:
            cursor = stay.first
            j -= 1
    while j >= 0 and legs[j].is_walk:
        walk = legs[j]
        step = _transition(walk.last, cursor, rules)
        if step != "ok":
            teleport |= step == "teleport"
            break
        i0 = _teleport_free_tail(walk.events, rules)
        access_s += elapsed_s(walk.events[i0], walk.last)
        cursor = walk.events[i0]
        absorbed.append(walk.leg_id)
        if i0 > 0:
            teleport = True
            break
        j -= 1
    wait_s = elapsed_s(cursor, boarding) - access_s
    journey_start = cursor

    # forward: egress walks
    cursor = alighting
    j = k + 1
    while j < len(legs) and legs[j].is_walk:
        walk = legs[j]
        step = _transition(cursor, walk.first, rules)
        if step != "ok":
            teleport |= step == "teleport"
            break
        i1 = _teleport_free_head(walk.events, rules)
        cursor = walk.events[i1]
        absorbed.append(walk.leg_id)
        if i1 < len(walk.events) - 1:
            teleport = True
            break
        j += 1
    egress_s = elapsed_s(alighting, cursor)

    return TransitDecomposition(
        access_walk=access_s / 60.0,
        platform_wait=max(0.0, wait_s) / 60.0,
        in_vehicle=elapsed_s(boarding, alighting) / 60.0,
        egress_walk=egress_s / 60.0,
        teleport_detected=teleport,
        absorbed_walk_ids=tuple(absorbed),
        start=journey_start,
        end=cursor,
    )
