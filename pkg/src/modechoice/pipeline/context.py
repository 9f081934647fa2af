"""Weather category, snow indicator and season for a trip."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from datetime import date, datetime
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Protocol

import yaml

from .clustering import round_half_up

log = logging.getLogger(__name__)

SEASON_BY_MONTH = {12: "winter", 1: "winter", 2: "winter", 3: "spring", 4: "spring", 5: "spring",
                   6: "summer", 7: "summer", 8: "summer", 9: "fall", 10: "fall", 11: "fall"}


class WeatherProvider(Protocol):
    def wmo_code(self, day: date, hour: int, lat1: float, lon1: float) -> int: ...


@lru_cache(maxsize=1)
def wmo_categories() -> dict[int, str]:
    text = resources.files("modechoice").joinpath("resources/wmo_codes.yaml").read_text()
    table = yaml.safe_load(text)
    return {int(code): cat for cat, codes in table.items() for code in codes}


def weather_category(code: int | None) -> str:
    if code is None:
        return "unknown"
    return wmo_categories().get(int(code), "unknown")


def season_of(day: date | datetime) -> str:
    return SEASON_BY_MONTH[day.month]


@dataclass(frozen=True)
class TripContext:
    weather: str
    season: str
    snow: bool
    flag: str | None = None


class WeatherCache:
    """Thread-safe memo of provider answers keyed by (date, rounded lat, rounded lon)."""

    def __init__(self, provider: WeatherProvider, path=None):
        self.provider = provider
        self._store: dict[tuple, int | None] = {}
        self._lock = threading.Lock()
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            for k, v in json.loads(self.path.read_text()).items():
                day, lat1, lon1 = k.split("|")
                self._store[(day, float(lat1), float(lon1))] = v

    def lookup(self, day: date, hour: int, lat1: float, lon1: float) -> int:
        key = (day.isoformat(), lat1, lon1)
        with self._lock:
            if key in self._store:
                code = self._store[key]
                if code is None:
                    raise LookupError("provider failed earlier for this key")
                return code
        try:
            code = int(self.provider.wmo_code(day, hour, lat1, lon1))
        except Exception:
            with self._lock:
                self._store[key] = None
            raise
        with self._lock:
            self._store.setdefault(key, code)
        return code

    def items(self) -> dict[str, int | None]:
        with self._lock:
            return {"|".join(map(str, k)): v for k, v in self._store.items()}

    def save(self, path=None) -> None:
        Path(path or self.path).write_text(json.dumps(self.items(), indent=1, sort_keys=True))


def enrich_context(when: datetime, origin: tuple[float, float], weather: WeatherProvider | WeatherCache) -> TripContext:
    """Weather category and season at the trip origin; provider failures give an unknown, flagged context."""
    lat1, lon1 = round_half_up(origin[0], 1), round_half_up(origin[1], 1)
    season = season_of(when)
    try:
        if isinstance(weather, WeatherCache):
            code = weather.lookup(when.date(), when.hour, lat1, lon1)
        else:
            code = weather.wmo_code(when.date(), when.hour, lat1, lon1)
    except Exception as exc:  # noqa: BLE001 - any provider failure degrades to unknown
        log.warning("weather lookup failed at %s (%s, %s): %s", when, lat1, lon1, exc)
        return TripContext("unknown", season, False, f"weather unavailable: {exc}")
    cat = weather_category(code)
    flag = None if cat != "unknown" else f"unmapped weather code {code}"
    return TripContext(cat, season, cat == "snowy", flag)
