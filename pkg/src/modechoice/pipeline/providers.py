"""Routing and weather provider interfaces, offline synthetic providers, caches and alternative generation."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np

from ..alternatives import ACTIVE_MODES, RP_MODES, TRANSIT_MODES, Mode
from ..data import AlternativeAttributes
from .clustering import ClusterKey
from .context import season_of
from .cost import estimate_cost

log = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    """A provider could not answer a query (no route, service down)."""


@dataclass(frozen=True)
class DrivingRoute:
    time_min: float
    distance_km: float


@dataclass(frozen=True)
class ActiveRoute:
    time_min: float
    distance_km: float


@dataclass(frozen=True)
class TransitRoute:
    submode: str
    total_min: float
    in_vehicle_min: float
    walk_min: float
    distance_km: float
    agencies: tuple[str, ...] = ()
    fare: float | None = None


class RoutingProvider(Protocol):
    def driving(self, key: ClusterKey) -> DrivingRoute: ...

    def transit(self, key: ClusterKey, submode: Mode) -> list[TransitRoute]: ...

    def active(self, key: ClusterKey, mode: Mode) -> ActiveRoute: ...


def _rng(seed: int, *parts) -> np.random.Generator:
    """Generator seeded from a stable hash of ``parts`` (independent of PYTHONHASHSEED)."""
    h = hashlib.blake2b("|".join(map(str, (seed,) + parts)).encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(h, "little"))


@dataclass
class SyntheticRouting:
    """Distance-based speed model per mode with small hash-seeded perturbations.

    Network distance is the crow-fly distance between the rounded cluster
    endpoints times ``detour``. Subway and train only serve a share of
    origin-destination pairs.
    """

    seed: int = 0
    detour: float = 1.3
    car_kmh: Mapping[str, float] = field(default_factory=lambda: {
        "night": 45.0, "am_peak": 24.0, "midday": 32.0, "pm_peak": 22.0, "evening": 38.0})
    transit_kmh: Mapping[str, float] = field(default_factory=lambda: {"bus": 17.0, "subway": 30.0, "train": 48.0})
    walk_kmh: float = 4.8
    bike_kmh: float = 15.0
    max_walk_km: float = 6.0
    subway_share: float = 0.5
    train_share: float = 0.4
    train_min_km: float = 8.0
    agencies: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: {
        "bus": ("local",), "subway": ("local",), "train": ("regional",)})

    def _km(self, key: ClusterKey) -> float:
        return max(0.2, key.crow_km * self.detour)

    def driving(self, key: ClusterKey) -> DrivingRoute:
        km = self._km(key)
        r = _rng(self.seed, key.token, "car")
        speed = self.car_kmh[key.period] * float(np.exp(r.normal(0.0, 0.1)))
        return DrivingRoute(km / speed * 60.0 + 2.0, km)

    def transit(self, key: ClusterKey, submode: Mode) -> list[TransitRoute]:
        km = self._km(key)
        r = _rng(self.seed, key.token, submode.value)
        served = {
            Mode.BUS: km >= 0.5,
            Mode.SUBWAY: km >= 2.0 and r.random() < self.subway_share,
            Mode.TRAIN: km >= self.train_min_km and r.random() < self.train_share,
        }[submode]
        if not served:
            raise ProviderError(f"no {submode.value} route for {key.token}")
        routes = []
        for _ in range(int(r.integers(1, 4))):
            walk = float(r.uniform(3.0, 14.0))
            ivt = km * float(np.exp(r.normal(0.05, 0.1))) / self.transit_kmh[submode.value] * 60.0
            wait = float(r.uniform(1.0, 10.0))
            routes.append(TransitRoute(submode.value, walk + ivt + wait, ivt, walk, km,
                                       tuple(self.agencies.get(submode.value, ()))))
        return routes

    def active(self, key: ClusterKey, mode: Mode) -> ActiveRoute:
        km = self._km(key)
        if mode is Mode.WALK and km > self.max_walk_km:
            raise ProviderError(f"walking route longer than {self.max_walk_km} km")
        speed = self.walk_kmh if mode is Mode.WALK else self.bike_kmh
        return ActiveRoute(km / speed * 60.0, km)


@dataclass
class SyntheticWeather:
    """Seeded WMO codes with seasonal category frequencies."""

    seed: int = 0
    by_season: Mapping[str, Mapping[int, float]] = field(default_factory=lambda: {
        "winter": {0: 0.20, 3: 0.35, 61: 0.10, 71: 0.25, 73: 0.10},
        "spring": {0: 0.35, 2: 0.30, 61: 0.25, 80: 0.10},
        "summer": {0: 0.50, 1: 0.15, 2: 0.15, 61: 0.10, 95: 0.10},
        "fall": {0: 0.30, 3: 0.35, 61: 0.25, 71: 0.10},
    })

    def wmo_code(self, day: date, hour: int, lat1: float, lon1: float) -> int:
        table = self.by_season[season_of(day)]
        r = _rng(self.seed, day.isoformat(), lat1, lon1)
        codes = list(table)
        p = np.array([table[c] for c in codes])
        return int(codes[int(r.choice(len(codes), p=p / p.sum()))])


class CachedRouting:
    """Thread-safe memo around a routing provider, keyed by cluster and query.

    Failures are cached as well, so a failing key is not retried. The cache
    can be written to and restored from a JSON file.
    """

    def __init__(self, provider: RoutingProvider, path=None):
        self.provider = provider
        self._lock = threading.Lock()
        self._store: dict[str, dict] = {}
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            self._store = json.loads(self.path.read_text())

    def _get(self, token: str, compute, decode):
        with self._lock:
            hit = self._store.get(token)
        if hit is None:
            try:
                value = compute()
                hit = {"ok": True, "value": value}
            except ProviderError as exc:
                hit = {"ok": False, "error": str(exc)}
            with self._lock:
                hit = self._store.setdefault(token, _jsonable(hit))
        if not hit["ok"]:
            raise ProviderError(hit["error"])
        return decode(hit["value"])

    def driving(self, key: ClusterKey) -> DrivingRoute:
        return self._get(f"{key.token}#car", lambda: self.provider.driving(key), _decode(DrivingRoute))

    def transit(self, key: ClusterKey, submode: Mode) -> list[TransitRoute]:
        return self._get(f"{key.token}#{submode.value}", lambda: self.provider.transit(key, submode),
                         lambda v: [_decode(TransitRoute)(x) for x in v])

    def active(self, key: ClusterKey, mode: Mode) -> ActiveRoute:
        return self._get(f"{key.token}#{mode.value}", lambda: self.provider.active(key, mode), _decode(ActiveRoute))

    def save(self, path=None) -> None:
        target = Path(path or self.path)
        with self._lock:
            target.write_text(json.dumps(self._store, indent=1, sort_keys=True))

    def __len__(self) -> int:
        return len(self._store)


def _jsonable(hit: dict) -> dict:
    v = hit.get("value")
    if isinstance(v, list):
        hit["value"] = [asdict(x) for x in v]
    elif v is not None:
        hit["value"] = asdict(v)
    return hit


def _decode(cls):
    def f(d):
        d = dict(d)
        if "agencies" in d:
            d["agencies"] = tuple(d["agencies"])
        return cls(**d)
    return f


@dataclass
class GeneratedAlternatives:
    attributes: dict[Mode, AlternativeAttributes]
    warnings: list[str] = field(default_factory=list)

    @property
    def routed(self) -> dict[Mode, bool]:
        return {m: a.available for m, a in self.attributes.items()}


def best_transit_route(routes: list[TransitRoute]) -> TransitRoute:
    """Route with the shortest total journey time (first one on ties)."""
    if not routes:
        raise ProviderError("provider returned no routes")
    return min(routes, key=lambda r: r.total_min)


def transit_attributes(route: TransitRoute, fare_table: Mapping[str, float] | None = None,
                       warnings: list[str] | None = None) -> AlternativeAttributes:
    """In-vehicle time, out-of-vehicle time (walk plus residual wait), fare and distance of a route."""
    wait = route.total_min - route.in_vehicle_min - route.walk_min
    if wait < 0:
        msg = f"{route.submode}: negative residual wait {wait:.2f} min clamped to 0"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        wait = 0.0
    cost = estimate_cost(route.submode, route.distance_km, route.agencies, fare_table, route.fare)
    return AlternativeAttributes(cost=cost, ivtt=route.in_vehicle_min, walk_access=route.walk_min + wait,
                                 distance=route.distance_km)


def generate_alternatives(key: ClusterKey, provider: RoutingProvider, *, chosen: Mode | None = None,
                          observed: AlternativeAttributes | None = None,
                          fare_table: Mapping[str, float] | None = None) -> GeneratedAlternatives:
    """Level-of-service attributes of the six RP modes for one cluster.

    A mode whose provider query fails is marked unavailable. When ``chosen``
    and ``observed`` are given, the chosen mode keeps the observed values.
    """
    out: dict[Mode, AlternativeAttributes] = {}
    warnings: list[str] = []
    for m in RP_MODES:
        try:
            if m is Mode.CAR:
                d = provider.driving(key)
                out[m] = AlternativeAttributes(cost=estimate_cost(m, d.distance_km), ivtt=d.time_min,
                                               distance=d.distance_km)
            elif m in TRANSIT_MODES:
                out[m] = transit_attributes(best_transit_route(provider.transit(key, m)), fare_table, warnings)
            elif m in ACTIVE_MODES:
                a = provider.active(key, m)
                out[m] = AlternativeAttributes(ivtt=a.time_min, distance=a.distance_km)
        except ProviderError as exc:
            warnings.append(f"{m.value}: {exc}")
            out[m] = AlternativeAttributes(available=False)
    if chosen is not None and observed is not None:
        out[chosen] = observed
    return GeneratedAlternatives(out, warnings)
