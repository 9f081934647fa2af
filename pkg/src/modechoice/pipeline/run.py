"""End-to-end conversion of GPS event streams into RP choice observations."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd

from ..alternatives import RP_MODES, TRANSIT_MODES, Mode
from ..data import (AlternativeAttributes, ChoiceObservation, Dataset, PersonProfile, build_availability,
                    load_persons, write_dataset)
from .anchors import AnchorConfig, AnchorResult, anchors_from_events
from .clustering import ClusterKey
from .context import WeatherCache, enrich_context
from .cost import estimate_cost
from .decomposition import LinkRules, TransitDecomposition, decompose_transit_journey
from .events import GpsEvent, Leg, haversine_m, load_events, path_length_m, segment_legs, trip_from_leg
from .providers import CachedRouting, ProviderError, RoutingProvider, SyntheticRouting, SyntheticWeather, \
    best_transit_route, generate_alternatives
from .screening import ScreeningReport, screen_trajectories
from .sp_gate import GateHistory, sp_gate

log = logging.getLogger(__name__)

LABEL_MODES = {
    "car": Mode.CAR, "drive": Mode.CAR, "driving": Mode.CAR, "auto": Mode.CAR,
    "bus": Mode.BUS, "tram": Mode.BUS, "streetcar": Mode.BUS,
    "subway": Mode.SUBWAY, "metro": Mode.SUBWAY,
    "train": Mode.TRAIN, "rail": Mode.TRAIN, "commuter_rail": Mode.TRAIN,
    "walk": Mode.WALK, "walking": Mode.WALK, "foot": Mode.WALK,
    "bicycle": Mode.BICYCLE, "bike": Mode.BICYCLE, "cycling": Mode.BICYCLE,
}
ANCHOR_RADIUS_M = 150.0


@dataclass(frozen=True)
class PipelineConfig:
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    links: LinkRules = field(default_factory=LinkRules)
    fare_table: Mapping[str, float] = field(default_factory=lambda: {"local": 3.25, "regional": 3.50})
    min_trip_km: float = 0.1
    workers: int = 1
    seed: int = 0

    @classmethod
    def from_mapping(cls, d: Mapping | None) -> "PipelineConfig":
        d = dict(d or {})
        anchors = AnchorConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.pop("anchors", {}).items()})
        links = LinkRules(**d.pop("links", {}))
        return cls(anchors=anchors, links=links, **d)


@dataclass(frozen=True)
class TripRecord:
    trip_id: str
    person_id: str
    mode: str
    cluster: str
    purpose: str
    gate_category: str
    decomposition: TransitDecomposition | None = None


@dataclass
class PipelineResult:
    dataset: Dataset
    trips: list[TripRecord]
    absorbed_walk_ids: set[str]
    screening: ScreeningReport
    anchors: dict[str, AnchorResult]
    skipped: dict[str, str]
    flags: list[str] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "n_observations": self.dataset.n_obs,
            "n_persons": len(self.dataset.persons),
            "screening": self.screening.to_dict(),
            "anchors": {p: {"home": a.home is not None, "work": a.work is not None, "flags": list(a.flags)}
                        for p, a in self.anchors.items()},
            "absorbed_walk_ids": sorted(self.absorbed_walk_ids),
            "skipped": self.skipped,
            "gate": {r.trip_id: r.gate_category for r in self.trips},
            "decompositions": {r.trip_id: _decomposition_row(r.decomposition)
                               for r in self.trips if r.decomposition is not None},
            "flags": self.flags,
        }


def _decomposition_row(d: TransitDecomposition) -> dict:
    return {"access_walk": d.access_walk, "platform_wait": d.platform_wait, "in_vehicle": d.in_vehicle,
            "egress_walk": d.egress_walk, "teleport_detected": d.teleport_detected,
            "absorbed_walk_ids": list(d.absorbed_walk_ids)}


def _near(point: tuple[float, float], anchor) -> bool:
    return anchor is not None and haversine_m(point[0], point[1], anchor.lat, anchor.lon) <= ANCHOR_RADIUS_M


def trip_purpose(origin: tuple[float, float], destination: tuple[float, float], anchors: AnchorResult) -> str:
    """'commute' between home and work, 'regular' when one end is an anchor, else 'other'."""
    o_home, d_home = _near(origin, anchors.home), _near(destination, anchors.home)
    o_work, d_work = _near(origin, anchors.work), _near(destination, anchors.work)
    if (o_home and d_work) or (o_work and d_home):
        return "commute"
    if o_home or d_home or o_work or d_work:
        return "regular"
    return "other"


def _observed_attributes(mode: Mode, leg: Leg, decomposition, routing, key, fare_table) -> AlternativeAttributes:
    km = path_length_m(leg.events) / 1000.0
    minutes = leg.duration_s / 60.0
    if mode is Mode.CAR:
        return AlternativeAttributes(cost=estimate_cost(mode, km), ivtt=minutes, distance=km)
    if mode in TRANSIT_MODES:
        agencies, fare = (), None
        try:
            route = best_transit_route(routing.transit(key, mode))
            agencies, fare = route.agencies, route.fare
        except ProviderError:
            pass
        return AlternativeAttributes(cost=estimate_cost(mode, km, agencies, fare_table, fare),
                                     ivtt=decomposition.in_vehicle, walk_access=decomposition.out_of_vehicle, distance=km)
    return AlternativeAttributes(ivtt=minutes, distance=km)


def process_person(person: PersonProfile, events: Sequence[GpsEvent], routing: RoutingProvider,
                   weather, config: PipelineConfig):
    """Observations, trip records, absorbed walk ids, skipped trips and anchors of one person."""
    legs = segment_legs(events)
    anchors = anchors_from_events(events, config.anchors)
    decomp: dict[str, TransitDecomposition] = {}
    for leg in legs:
        if leg.kind == "track" and LABEL_MODES.get((leg.mode_label or "").lower()) in TRANSIT_MODES:
            decomp[leg.leg_id] = decompose_transit_journey(events, leg, config.links)
    absorbed = {w for d in decomp.values() for w in d.absorbed_walk_ids}

    history = GateHistory()
    observations, records, skipped = [], [], {}
    for leg in legs:
        if leg.kind != "track" or leg.leg_id in absorbed:
            continue
        mode = LABEL_MODES.get((leg.mode_label or "").lower())
        if mode is None:
            skipped[leg.leg_id] = f"unsupported mode label {leg.mode_label!r}"
            continue
        if len(leg.events) < 2:
            skipped[leg.leg_id] = "single-event track"
            continue
        trip = trip_from_leg(leg)
        d = decomp.get(leg.leg_id)
        if d is not None:  # whole journey, access walk to egress walk
            trip = replace(trip, origin=(d.start.lat, d.start.lon), destination=(d.end.lat, d.end.lon),
                           departure=d.start.timestamp)
        if trip.distance_km < config.min_trip_km:
            skipped[leg.leg_id] = "shorter than minimum trip distance"
            continue
        purpose = trip_purpose(trip.origin, trip.destination, anchors)
        key = ClusterKey.of(trip.origin, trip.destination, trip.departure)
        observed = _observed_attributes(mode, leg, decomp.get(leg.leg_id), routing, key, config.fare_table)
        alts = generate_alternatives(key, routing, chosen=mode, observed=observed, fare_table=config.fare_table)
        routed = alts.routed
        try:
            avail = build_availability(person, routed, observed_car_use=person.car_observed or mode is Mode.CAR)
        except ValueError as exc:
            skipped[leg.leg_id] = str(exc)
            continue
        avail[mode] = True  # an observed choice is by definition feasible
        attrs = {m: replace(alts.attributes[m], available=avail[m]) for m in RP_MODES}
        if sum(a.available for a in attrs.values()) < 2:
            skipped[leg.leg_id] = "fewer than two available alternatives"
            continue
        ctx = enrich_context(trip.departure, trip.origin, weather)
        gate = sp_gate(mode, trip.distance_km, purpose, key, trip.departure, history)
        observations.append(ChoiceObservation(
            obs_id=leg.leg_id, person_id=person.person_id, source="RP", chosen=mode, attributes=attrs,
            purpose_work_study=purpose == "commute", snow=ctx.snow, weather=ctx.weather, season=ctx.season,
            period=key.period, sp_trigger=gate.eligible))
        records.append(TripRecord(leg.leg_id, person.person_id, mode.value, key.token, purpose, gate.category,
                                  decomp.get(leg.leg_id)))
    return observations, records, absorbed, skipped, anchors


def run_pipeline(events_by_person: Mapping[str, Sequence[GpsEvent]], persons: Sequence[PersonProfile],
                 routing: RoutingProvider | None = None, weather=None,
                 config: PipelineConfig | None = None) -> PipelineResult:
    """Screen, segment, enrich and assemble RP observations for every person with a profile.

    Persons are processed independently (on ``config.workers`` threads);
    the routing and weather caches are shared. The integration index is
    re-centred over the persons that end up with observations.
    """
    config = config or PipelineConfig()
    routing = routing if isinstance(routing, CachedRouting) else CachedRouting(routing or SyntheticRouting(config.seed))
    weather = weather if isinstance(weather, WeatherCache) else WeatherCache(weather or SyntheticWeather(config.seed))
    profiles = {p.person_id: p for p in persons}
    clean, screening = screen_trajectories(events_by_person, config.links.speed_limit)
    flags = [f"person {pid}: no profile, events ignored" for pid in clean if pid not in profiles]
    todo = [(profiles[pid], ev) for pid, ev in clean.items() if pid in profiles]

    def work(item):
        return process_person(item[0], item[1], routing, weather, config)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(work, todo))
    else:
        results = [work(item) for item in todo]

    observations, records, absorbed, skipped, anchors = [], [], set(), {}, {}
    for (person, _), (obs, rec, ab, sk, an) in zip(todo, results):
        observations += obs
        records += rec
        absorbed |= ab
        skipped.update(sk)
        anchors[person.person_id] = an
    kept = {o.person_id for o in observations}
    ds = Dataset(tuple(p for p in persons if p.person_id in kept), tuple(observations))
    if ds.persons:
        ds = ds.recentred()
    return PipelineResult(ds, records, absorbed, screening, anchors, skipped, flags)


def run_files(events_path, persons_path, out_dir, config: PipelineConfig | None = None,
              routing: RoutingProvider | None = None, weather=None) -> PipelineResult:
    """File-to-file pipeline run; writes observations, persons, a report and provider caches under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = config or PipelineConfig()
    events = load_events(events_path)
    persons, _ = load_persons(persons_path)
    routing = CachedRouting(routing or SyntheticRouting(config.seed), out / "routing_cache.json")
    weather = WeatherCache(weather or SyntheticWeather(config.seed), out / "weather_cache.json")
    result = run_pipeline(events, persons, routing, weather, config)
    write_dataset(result.dataset, out / "observations.csv", out / "persons.csv")
    # keep the original integration dimension scores of retained persons
    src = pd.read_csv(persons_path, dtype={"person_id": str})
    src[src["person_id"].isin({p.person_id for p in result.dataset.persons})].to_csv(out / "persons.csv", index=False)
    (out / "pipeline_report.json").write_text(json.dumps(result.report(), indent=2, default=str))
    routing.save()
    weather.save()
    return result
