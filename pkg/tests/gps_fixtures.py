"""Hand-built multi-day GPS event streams for pipeline tests."""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from modechoice.pipeline.events import GpsEvent

HOME = (43.6680, -79.4030)
STOP = (43.66802, -79.39860)
WORK = (43.6756, -79.3112)
SHOP = (43.6640, -79.4100)


def _line(pid, t0, a, b, minutes, n, kind, label):
    ts = [t0 + timedelta(minutes=minutes * i / (n - 1)) for i in range(n)]
    lats = np.linspace(a[0], b[0], n)
    lons = np.linspace(a[1], b[1], n)
    return [GpsEvent(pid, t, float(la), float(lo), kind, label) for t, la, lo in zip(ts, lats, lons)]


def _stay(pid, place, times):
    return [GpsEvent(pid, t, place[0], place[1], "stay") for t in times]


def commuter_events(pid: str = "p1", days: int = 14, start: datetime = datetime(2025, 3, 3),
                    return_mode: str = "car") -> list[GpsEvent]:
    """Weekday bus commutes (with access walk, platform wait and egress walk) and a weekend shop walk."""
    ev: list[GpsEvent] = []
    for k in range(days):
        d = start + timedelta(days=k)
        at = lambda h, m=0, s=0: d + timedelta(hours=h, minutes=m, seconds=s)  # noqa: E731
        if d.weekday() < 5:
            ev += _stay(pid, HOME, [at(0, 10), at(3), at(6), at(7, 39)])
            ev += _line(pid, at(7, 40), (43.6681, -79.4028), (43.6681, -79.3987), 4.3, 7, "track", "walk")
            ev += _stay(pid, STOP, [at(7, 45), at(7, 46, 30), at(7, 47, 30)])
            ev += _line(pid, at(7, 48), (43.6679, -79.3985), (43.6720, -79.3115), 22, 12, "track", "bus")
            ev += _line(pid, at(8, 10, 30), (43.67215, -79.3113), (43.6755, -79.3113), 5.1, 7, "track", "walk")
            ev += _stay(pid, WORK, [at(8, 16, 30), at(9), at(12), at(17)])
            ev += _line(pid, at(17, 5), WORK, HOME, 25, 14, "track", return_mode)
            ev += _stay(pid, HOME, [at(17, 35), at(20), at(23, 50)])
        else:
            ev += _stay(pid, HOME, [at(0, 10), at(6), at(10, 50)])
            ev += _line(pid, at(11), HOME, SHOP, 12, 8, "track", "walk")
            ev += _stay(pid, SHOP, [at(11, 15), at(11, 45)])
            ev += _line(pid, at(12), SHOP, HOME, 12, 8, "track", "walk")
            ev += _stay(pid, HOME, [at(12, 15), at(18), at(23, 50)])
    return ev
