from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modechoice.alternatives import RP_MODES, Mode
from modechoice.data import (AlternativeAttributes, ChoiceObservation, DataValidationError, PersonProfile,
                             ScaledAttributes, build_availability, center_integration, load_dataset,
                             observations_frame, persons_frame, scale_attributes, unscale_attributes,
                             write_dataset)

from oracles import random_dataset


def person_row(pid, econ, **kw):
    row = dict(person_id=pid, migrant=0, full_time=1, student=0, child_0_10=0, safe=1, cyc_friendly=0,
               car_owned=1, car_observed=0, bike_owned=0, integ_econ=econ, integ_soc=econ, integ_civic=econ,
               integ_health=econ)
    row.update(kw)
    return row


def obs_rows(pid, oid, chosen, avail=None):
    avail = avail or {"car": 1, "bus": 1, "walk": 1}
    rows = []
    for alt, a in avail.items():
        rows.append(dict(person_id=pid, obs_id=oid, source="RP", alt=alt, avail=a, chosen=int(alt == chosen),
                         cost_cad=5.0 if alt != "walk" else 0.0, ivtt_min=20.0, walk_min=5.0 if alt == "bus" else 0.0,
                         dist_km=8.0, purpose_ws=1, snow=0, weather="sunny", season="fall", period="am_peak"))
    return rows


@pytest.fixture
def tables():
    persons = pd.DataFrame([person_row("A", 8.5), person_row("B", 6.7, migrant=1)])
    obs = pd.DataFrame(obs_rows("A", "o1", "car") + obs_rows("A", "o2", "bus") + obs_rows("B", "o3", "walk"))
    return obs, persons


def test_load_preserves_counts(tables):
    ds = load_dataset(*tables)
    assert ds.counts == {"A": 2, "B": 1}


def test_load_centres_integration(tables):
    ds = load_dataset(*tables)
    centred = {p.person_id: p.integration_centred for p in ds.persons}
    assert centred["A"] == pytest.approx(0.9, abs=1e-12)
    assert centred["B"] == pytest.approx(-0.9, abs=1e-12)


def test_chosen_unavailable_is_reported(tables):
    obs, persons = tables
    obs.loc[(obs.obs_id == "o1") & (obs.alt == "car"), "avail"] = 0
    with pytest.raises(DataValidationError, match="chosen unavailable"):
        load_dataset(obs, persons)


def test_all_problems_are_collected_with_row_locations(tables):
    obs, persons = tables
    obs = pd.concat([obs, pd.DataFrame(obs_rows("Z", "o9", "car"))], ignore_index=True)
    obs.loc[obs.obs_id == "o2", "chosen"] = 0
    obs = pd.concat([obs, obs.iloc[[0]]], ignore_index=True)
    with pytest.raises(DataValidationError) as err:
        load_dataset(obs, persons)
    text = "\n".join(err.value.problems)
    assert "unknown person_id 'Z'" in text
    assert "0 chosen rows" in text
    assert "duplicate (obs_id, alternative)" in text
    assert all("row" in p for p in err.value.problems)


def test_round_trip_through_files(tmp_path):
    ds = random_dataset(4, 3, seed=1)
    write_dataset(ds, tmp_path / "o.csv", tmp_path / "p.csv")
    back = load_dataset(tmp_path / "o.csv", tmp_path / "p.csv")
    assert back.counts == ds.counts
    for a, b in zip(ds.observations, back.observations):
        assert a.chosen == b.chosen
        for m in a.attributes:
            assert b.attributes[m].cost == pytest.approx(a.attributes[m].cost)
            assert b.attributes[m].available == a.attributes[m].available


def test_frames_have_documented_columns():
    ds = random_dataset(2, 2, seed=0)
    assert {"person_id", "obs_id", "source", "alt", "avail", "chosen", "sp_trigger"} <= set(observations_frame(ds))
    assert "integ_econ" in persons_frame(ds.persons).columns


@pytest.mark.parametrize("raw, expected", [
    (AlternativeAttributes(cost=13.90), ScaledAttributes(1.390, 0, 0, 0)),
    (AlternativeAttributes(distance=32.6), ScaledAttributes(0, 0, 0, 0.0326)),
    (AlternativeAttributes(), ScaledAttributes(0, 0, 0, 0)),
])
def test_scale_examples(raw, expected):
    got = scale_attributes(raw)
    for f in ("cost", "ivtt", "walk", "dist"):
        assert getattr(got, f) == pytest.approx(getattr(expected, f), abs=1e-15)


nonneg = st.floats(min_value=0, max_value=1e6, allow_nan=False)


@given(nonneg, nonneg, nonneg, nonneg)
def test_scaling_is_invertible(c, t, w, d):
    raw = AlternativeAttributes(c, t, w, d)
    back = unscale_attributes(scale_attributes(raw))
    for f in ("cost", "ivtt", "walk_access", "distance"):
        assert getattr(back, f) == pytest.approx(getattr(raw, f), rel=1e-12, abs=1e-12)


def test_negative_attribute_rejected():
    with pytest.raises(ValueError):
        AlternativeAttributes(cost=-1)


def test_emobility_only_in_sp():
    attrs = {Mode.CAR: AlternativeAttributes(), Mode.EMOBILITY: AlternativeAttributes()}
    with pytest.raises(ValueError, match="e-mobility"):
        ChoiceObservation("x", "p", "RP", Mode.CAR, attrs)
    ChoiceObservation("x", "p", "SP", Mode.EMOBILITY, attrs)


def test_observation_needs_two_available():
    attrs = {Mode.CAR: AlternativeAttributes(), Mode.BUS: AlternativeAttributes(available=False)}
    with pytest.raises(ValueError, match="two available"):
        ChoiceObservation("x", "p", "RP", Mode.CAR, attrs)


ALL_ROUTED = {m: True for m in RP_MODES}


def test_bicycle_needs_ownership():
    flags = build_availability(PersonProfile("p", car_owned=True, bike_owned=False), ALL_ROUTED)
    assert flags[Mode.BICYCLE] is False


def test_car_needs_ownership_or_use():
    flags = build_availability(PersonProfile("p"), ALL_ROUTED)
    assert flags[Mode.CAR] is False
    assert build_availability(PersonProfile("p", car_observed=True), ALL_ROUTED)[Mode.CAR] is True


def test_everything_available():
    flags = build_availability(PersonProfile("p", car_owned=True, bike_owned=True), ALL_ROUTED)
    assert all(flags[m] for m in RP_MODES)


def test_empty_choice_set():
    with pytest.raises(ValueError, match="empty choice set"):
        build_availability(PersonProfile("p"), {m: False for m in RP_MODES})


@pytest.mark.parametrize("raw, expected", [
    ([7, 7, 7], [0, 0, 0]),
    ([8.5, 6.7], [0.9, -0.9]),
    ([1, 10], [-4.5, 4.5]),
])
def test_centring_examples(raw, expected):
    np.testing.assert_allclose(center_integration(raw), expected, atol=1e-12)


def test_centring_rejects_empty():
    with pytest.raises(ValueError):
        center_integration([])


@settings(max_examples=200)
@given(st.lists(st.floats(min_value=1, max_value=5), min_size=1, max_size=50), st.floats(min_value=0, max_value=5))
def test_centring_mean_zero_and_shift_invariant(raw, shift):
    once = center_integration(raw)
    assert abs(math.fsum(once)) / len(once) < 1e-9
    # centring removes any common offset, so re-centring centred data changes nothing
    np.testing.assert_allclose(center_integration(np.asarray(raw) + shift), once, atol=1e-9)
