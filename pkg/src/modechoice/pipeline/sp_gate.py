"""Eligibility of observed trips for a stated preference prompt."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timedelta

from ..alternatives import ACTIVE_MODES, TRANSIT_MODES, Mode
from .clustering import ClusterKey

CAR_SPLIT_KM = 5.0
TRANSIT_SPLIT_KM = 1.5
ELIGIBLE_PURPOSES = frozenset({"commute", "work", "study", "regular"})
REPEAT_WINDOW = timedelta(days=7)

CAR_LONG = "car > 5 km"
CAR_SHORT = "car ≤ 5 km"
PT_LONG = "PT > 1.5 km"
PT_SHORT = "PT ≤ 1.5 km"
INELIGIBLE = "ineligible"
CATEGORIES = (CAR_LONG, CAR_SHORT, PT_LONG, PT_SHORT, INELIGIBLE)


@dataclass(frozen=True)
class GateDecision:
    eligible: bool
    category: str
    reason: str | None = None


class GateHistory:
    """When each cluster last triggered a prompt; safe to share across threads."""

    def __init__(self, window: timedelta = REPEAT_WINDOW):
        self.window = window
        self._last: dict[ClusterKey, datetime] = {}
        self._lock = threading.Lock()

    def recently_gated(self, key: ClusterKey, when: datetime) -> bool:
        with self._lock:
            last = self._last.get(key)
        return last is not None and timedelta(0) <= when - last < self.window

    def record(self, key: ClusterKey, when: datetime) -> None:
        with self._lock:
            self._last[key] = when


def sp_gate(mode: Mode | str, distance_km: float, purpose: str, key: ClusterKey, when: datetime,
            history: GateHistory | None = None, record: bool = True) -> GateDecision:
    """Classify a trip and, when eligible, note it in ``history``.

    Category boundaries are inclusive on the short side: exactly 5 km by
    car is "car ≤ 5 km".
    """
    m = Mode.parse(mode)
    if m in ACTIVE_MODES:
        return GateDecision(False, INELIGIBLE, "active mode")
    if m is not Mode.CAR and m not in TRANSIT_MODES:
        return GateDecision(False, INELIGIBLE, f"mode {m.value} not gated")
    if purpose not in ELIGIBLE_PURPOSES:
        return GateDecision(False, INELIGIBLE, f"purpose {purpose!r}")
    if history is not None and history.recently_gated(key, when):
        return GateDecision(False, INELIGIBLE, "repeat within window")
    if m is Mode.CAR:
        cat = CAR_LONG if distance_km > CAR_SPLIT_KM else CAR_SHORT
    else:
        cat = PT_LONG if distance_km > TRANSIT_SPLIT_KM else PT_SHORT
    if history is not None and record:
        history.record(key, when)
    return GateDecision(True, cat)
