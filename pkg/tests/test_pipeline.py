from __future__ import annotations

from dataclasses import replace
from datetime import date, datetime, timedelta
from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from modechoice.alternatives import Mode
from modechoice.data import AlternativeAttributes, PersonProfile
from modechoice.pipeline.anchors import StayEpisode, anchors_from_events, infer_anchors
from modechoice.pipeline.clustering import PERIOD_NAMES, ClusterKey, cluster_trips, period_of, round3
from modechoice.pipeline.context import WeatherCache, enrich_context, season_of, weather_category
from modechoice.pipeline.cost import estimate_cost
from modechoice.pipeline.decomposition import decompose_transit_journey
from modechoice.pipeline.events import GpsEvent, Trip, elapsed_s, load_events, segment_legs
from modechoice.pipeline.providers import (CachedRouting, ProviderError, SyntheticRouting, TransitRoute,
                                           best_transit_route, generate_alternatives, transit_attributes)
from modechoice.pipeline.run import PipelineConfig, run_pipeline
from modechoice.pipeline.screening import IMPOSSIBLE_SPEED, ZERO_VARIANCE, screen_trajectories
from modechoice.pipeline.sp_gate import CAR_LONG, INELIGIBLE, PT_SHORT, GateHistory, sp_gate

from gps_fixtures import HOME, WORK, commuter_events


def example_journey() -> list[GpsEvent]:
    path = resources.files("modechoice").joinpath("resources/transit_journey_example.csv")
    return load_events(path)["example"]


def bus_leg(events):
    return next(leg for leg in segment_legs(events) if leg.mode_label == "bus")


def shifted(events, leg_id, *, dlat=0.0, dt=timedelta(0), after=False):
    """Move one leg (or, with ``after``, that leg and everything later) in space or time."""
    legs = segment_legs(events)
    k = next(i for i, leg in enumerate(legs) if leg.leg_id == leg_id)
    move = {id(e) for leg in (legs[k:] if after else [legs[k]]) for e in leg.events}
    return [replace(e, lat=e.lat + dlat, timestamp=e.timestamp + dt) if id(e) in move else e for e in events]


# ---------------------------------------------------------------- decomposition

def test_example_journey_components():
    ev = example_journey()
    d = decompose_transit_journey(ev, bus_leg(ev))
    assert d.access_walk == pytest.approx(4.3, abs=0.05)
    assert d.platform_wait == pytest.approx(3.7, abs=0.05)
    assert d.in_vehicle == pytest.approx(22.0, abs=0.05)
    assert d.egress_walk == pytest.approx(5.6, abs=0.05)
    assert not d.teleport_detected
    assert len(d.absorbed_walk_ids) == 2


def test_components_sum_to_linked_duration():
    ev = example_journey()
    d = decompose_transit_journey(ev, bus_leg(ev))
    assert d.total == pytest.approx(elapsed_s(d.start, d.end) / 60.0, abs=0.1)
    assert min(d.access_walk, d.platform_wait, d.in_vehicle, d.egress_walk) >= 0


def test_access_walk_300m_away_not_linked():
    ev = example_journey()
    access = [leg for leg in segment_legs(ev) if leg.is_walk][0]
    moved = shifted(ev, access.leg_id, dlat=0.0027)  # about 300 m north
    d = decompose_transit_journey(moved, bus_leg(moved))
    assert d.access_walk == 0.0
    assert access.leg_id not in d.absorbed_walk_ids
    assert d.egress_walk == pytest.approx(5.6, abs=0.05)


def test_egress_after_long_gap_not_linked():
    ev = example_journey()
    egress = [leg for leg in segment_legs(ev) if leg.is_walk][-1]
    late = shifted(ev, egress.leg_id, dt=timedelta(minutes=26), after=True)
    d = decompose_transit_journey(late, bus_leg(late))
    assert d.egress_walk == 0.0
    assert d.access_walk == pytest.approx(4.3, abs=0.05)


def test_no_surrounding_walks():
    leg = bus_leg(example_journey())
    d = decompose_transit_journey(list(leg.events), leg)
    assert (d.access_walk, d.platform_wait, d.egress_walk) == (0.0, 0.0, 0.0)
    assert d.in_vehicle == pytest.approx(22.0, abs=1e-9)


def test_teleport_flagged():
    ev = example_journey()
    access = [leg for leg in segment_legs(ev) if leg.is_walk][0]
    i = ev.index(access.events[3])
    ev[i] = replace(ev[i], lat=ev[i].lat + 1.0)  # one fix 110 km away
    d = decompose_transit_journey(ev, bus_leg(ev))
    assert d.teleport_detected
    assert d.access_walk < 4.3
    assert min(d.access_walk, d.platform_wait, d.egress_walk) >= 0


def test_unknown_track_rejected():
    ev = example_journey()
    with pytest.raises(ValueError):
        decompose_transit_journey(ev[:5], bus_leg(ev))


# ---------------------------------------------------------------- clustering

def test_rounding_example():
    key = ClusterKey.of((43.65321, -79.38291), (43.7, -79.4), datetime(2025, 1, 6, 8))
    assert (key.origin_lat3, key.origin_lon3) == (43.653, -79.383)


def _trip(tid, hour, minute=0, o=(43.65321, -79.38291), d=(43.67, -79.31)):
    t = datetime(2025, 1, 6, hour, minute)
    return Trip(tid, "p", "car", o, d, t, t + timedelta(minutes=20), 5.0)


def test_same_period_same_cluster():
    keys = cluster_trips([_trip("a", 8), _trip("b", 8, 45), _trip("c", 12)])
    assert keys["a"] == keys["b"]
    assert keys["a"] != keys["c"]


@pytest.mark.parametrize("hm, period", [((0, 0), "night"), ((6, 29), "night"), ((6, 30), "am_peak"),
                                        ((9, 29), "am_peak"), ((9, 30), "midday"), ((15, 30), "pm_peak"),
                                        ((18, 29), "pm_peak"), ((18, 30), "evening"), ((23, 59), "evening")])
def test_period_boundaries(hm, period):
    assert period_of(datetime(2025, 1, 1, *hm)) == period


@given(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9), st.integers(0, 23), st.integers(0, 59))
def test_clustering_idempotent(lat, lon, h, m):
    key = ClusterKey.of((lat, lon), (lat, lon), datetime(2025, 1, 1, h, m))
    again = ClusterKey.of((key.origin_lat3, key.origin_lon3), (key.dest_lat3, key.dest_lon3),
                          datetime(2025, 1, 1, h, m))
    assert again == key
    assert key.period in PERIOD_NAMES
    assert round3(key.origin_lat3) == key.origin_lat3


# ---------------------------------------------------------------- cost

def test_car_cost():
    assert estimate_cost(Mode.CAR, 10.0) == pytest.approx(7.50)


def test_multi_agency_takes_highest_fare():
    assert estimate_cost(Mode.BUS, 5, ["A", "B"], {"A": 3.25, "B": 3.50}) == 3.50


def test_unknown_agency_falls_back():
    assert estimate_cost(Mode.SUBWAY, 5, ["X"], {"A": 3.25}) == 3.50
    assert estimate_cost(Mode.BUS, 5) == 3.50


def test_provider_fare_wins():
    assert estimate_cost(Mode.TRAIN, 30, ["A"], {"A": 3.25}, provider_fare=6.10) == 6.10


@given(st.sampled_from(list(Mode)), st.floats(0, 500), st.lists(st.sampled_from(["A", "B", "C"]), max_size=3))
def test_cost_total_and_nonnegative(mode, km, agencies):
    if mode is Mode.EMOBILITY:
        with pytest.raises(ValueError):
            estimate_cost(mode, km)
        return
    c = estimate_cost(mode, km, agencies, {"A": 3.25, "B": 3.5})
    assert c >= 0 and c < float("inf")


# ---------------------------------------------------------------- context

@pytest.mark.parametrize("code, cat", [(0, "sunny"), (3, "cloudy"), (61, "rainy"), (71, "snowy"), (999, "unknown")])
def test_weather_categories(code, cat):
    assert weather_category(code) == cat


def test_snow_flag_and_season():
    class Snow:
        def wmo_code(self, day, hour, lat1, lon1):
            return 71
    ctx = enrich_context(datetime(2025, 12, 15, 8), (43.66, -79.4), Snow())
    assert (ctx.weather, ctx.snow, ctx.season) == ("snowy", True, "winter")
    assert season_of(date(2025, 12, 15)) == "winter"
    assert season_of(date(2025, 7, 1)) == "summer"


def test_weather_failure_degrades_and_is_cached():
    calls = []

    class Broken:
        def wmo_code(self, day, hour, lat1, lon1):
            calls.append((lat1, lon1))
            raise RuntimeError("down")
    cache = WeatherCache(Broken())
    for _ in range(2):
        ctx = enrich_context(datetime(2025, 3, 1, 9), (43.66, -79.44), cache)
        assert (ctx.weather, ctx.snow) == ("unknown", False) and ctx.flag
    assert calls == [(43.7, -79.4)]  # queried once, at one-decimal coordinates


# ---------------------------------------------------------------- SP gate

KEY = ClusterKey(43.668, -79.403, 43.676, -79.311, "am_peak")


def test_gate_examples():
    when = datetime(2025, 3, 3, 8)
    assert sp_gate(Mode.CAR, 8.0, "commute", KEY, when, GateHistory()).category == CAR_LONG
    assert sp_gate(Mode.BUS, 1.0, "commute", KEY, when, GateHistory()).category == PT_SHORT
    assert sp_gate(Mode.WALK, 1.0, "commute", KEY, when, GateHistory()).category == INELIGIBLE


def test_gate_repeat_window():
    h = GateHistory()
    t = datetime(2025, 3, 3, 8)
    assert sp_gate(Mode.CAR, 8.0, "commute", KEY, t, h).eligible
    assert not sp_gate(Mode.CAR, 8.0, "commute", KEY, t + timedelta(days=3), h).eligible
    assert sp_gate(Mode.CAR, 8.0, "commute", KEY, t + timedelta(days=7), h).eligible


def test_gate_purpose():
    assert not sp_gate(Mode.CAR, 8.0, "other", KEY, datetime(2025, 3, 3), None).eligible


# ---------------------------------------------------------------- providers

def test_residual_wait():
    a = transit_attributes(TransitRoute("bus", 40, 28, 9, 10, ("local",)), {"local": 3.25})
    assert a.walk_access == pytest.approx(12.0)  # walk 9 plus wait 3
    assert a.ivtt == 28 and a.cost == 3.25


def test_negative_wait_clamped_with_warning():
    warnings = []
    a = transit_attributes(TransitRoute("bus", 30, 28, 4, 10), None, warnings)
    assert a.walk_access == 4.0
    assert warnings and "clamped" in warnings[0]


def test_best_route_by_total_time():
    routes = [TransitRoute("bus", 42, 30, 6, 10), TransitRoute("bus", 35, 25, 8, 10)]
    assert best_transit_route(routes).total_min == 35


def test_failing_mode_becomes_unavailable_and_chosen_kept():
    class NoTransit(SyntheticRouting):
        def transit(self, key, submode):
            raise ProviderError("down")
    observed = AlternativeAttributes(cost=3.25, ivtt=22, walk_access=13.6, distance=7.1)
    alts = generate_alternatives(KEY, NoTransit(), chosen=Mode.BUS, observed=observed)
    assert alts.attributes[Mode.BUS] == observed
    assert not alts.attributes[Mode.SUBWAY].available
    assert alts.attributes[Mode.CAR].available


def test_routing_cache_round_trip(tmp_path):
    cache = CachedRouting(SyntheticRouting(3), tmp_path / "c.json")
    first = cache.driving(KEY), cache.transit(KEY, Mode.BUS)
    cache.save()
    again = CachedRouting(SyntheticRouting(99), tmp_path / "c.json")
    assert (again.driving(KEY), again.transit(KEY, Mode.BUS)) == first


# ---------------------------------------------------------------- screening

def _track(points, label="car", pid="s"):
    t0 = datetime(2025, 3, 3, 8)
    return [GpsEvent(pid, t0 + timedelta(seconds=s), la, lo, "track", label) for s, la, lo in points]


def test_impossible_speed_flagged():
    ev = _track([(0, 43.6, -79.4), (60, 44.5, -79.4), (120, 43.6005, -79.4), (180, 43.601, -79.4)])
    clean, report = screen_trajectories({"s": ev})
    assert report.hits["s"][IMPOSSIBLE_SPEED] >= 1
    assert all(e.lat < 44 for e in clean["s"])


def test_zero_variance_flagged():
    ev = _track([(60 * i, 43.6, -79.4) for i in range(5)] + [(400, 43.61, -79.4), (460, 43.62, -79.4)])
    _, report = screen_trajectories({"s": ev})
    assert report.hits["s"][ZERO_VARIANCE] == 1


def test_urban_track_passes():
    # 30 km/h is about 0.0075 degrees of latitude per 100 s
    ev = _track([(100 * i, 43.6 + 0.0075 * i, -79.4) for i in range(10)])
    clean, report = screen_trajectories({"s": ev})
    assert clean["s"] == ev
    assert not report.hits.get("s")


def test_all_bad_person_rejected():
    ev = _track([(60 * i, 43.6, -79.4) for i in range(4)])
    clean, report = screen_trajectories({"s": ev})
    assert "s" not in clean and report.rejected == ["s"]


# ---------------------------------------------------------------- anchors

def test_commuter_anchors():
    res = anchors_from_events(commuter_events())
    assert res.home is not None and res.work is not None
    assert abs(res.home.lat - HOME[0]) < 1e-3 and abs(res.work.lon - WORK[1]) < 1e-3


def _episodes(place, days, start_h, end_h, weekdays_only=False, first=date(2025, 3, 3)):
    out = []
    for k in range(days):
        d = datetime.combine(first + timedelta(days=k), datetime.min.time())
        if weekdays_only and d.weekday() >= 5:
            continue
        s = d + timedelta(hours=start_h)
        e = d + timedelta(hours=end_h)
        out.append(StayEpisode("x", place[0], place[1], s, e))
    return out


def test_night_at_a_weekday_day_at_b():
    eps = _episodes(HOME, 14, 22, 31) + _episodes(WORK, 14, 9, 17, weekdays_only=True)
    res = infer_anchors(eps)
    assert res.home.lat == pytest.approx(HOME[0]) and res.work.lat == pytest.approx(WORK[0])


def test_no_weekday_regularity_means_no_work():
    res = infer_anchors(_episodes(HOME, 14, 22, 31))
    assert res.work is None and any("work undefined" in f for f in res.flags)


def test_twenty_nights_beat_three():
    other = (43.70, -79.50)
    eps = _episodes(HOME, 20, 22, 31) + _episodes(other, 3, 22, 31, first=date(2025, 3, 30))
    assert infer_anchors(eps).home.lat == pytest.approx(HOME[0])


def test_insufficient_stays():
    res = infer_anchors(_episodes(HOME, 3, 22, 31))
    assert res.home is None and res.flags


# ---------------------------------------------------------------- end to end

PEOPLE = [PersonProfile("p1", car_owned=True, integration_raw=7.0),
          PersonProfile("p2", migrant=True, car_owned=True, integration_raw=5.0)]


@pytest.fixture(scope="module")
def two_commuters():
    return {"p1": commuter_events("p1"), "p2": commuter_events("p2", return_mode="bus")}


def test_absorbed_walks_never_observations(two_commuters):
    res = run_pipeline(two_commuters, PEOPLE)
    ids = {o.obs_id for o in res.dataset.observations}
    assert res.absorbed_walk_ids and not (ids & res.absorbed_walk_ids)
    assert res.dataset.n_obs > 0
    commute = [r for r in res.trips if r.mode == "bus" and r.cluster.endswith("am_peak")]
    assert commute and all(r.decomposition.access_walk > 0 for r in commute)


def test_parallel_run_matches_serial(two_commuters):
    serial = run_pipeline(two_commuters, PEOPLE, config=PipelineConfig(workers=1))
    threaded = run_pipeline(two_commuters, PEOPLE, config=PipelineConfig(workers=2))
    assert serial.dataset.observations == threaded.dataset.observations
    assert serial.report() == threaded.report()
