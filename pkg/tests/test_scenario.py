from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modechoice.alternatives import RP_MODES
from modechoice.model import ModelSpec, published_parameters
from modechoice.scenario import (BASELINE_ACCESS, BASELINE_FARE, integration_gradient, load_representative_trip,
                                 mode_probabilities, sweep_access, sweep_fare, transit_probability)

M3 = ModelSpec.load("M3")
PARAMS = published_parameters("M3", M3)
TRIP = load_representative_trip()


def test_trip_baseline_levers():
    assert TRIP.fare == BASELINE_FARE == 3.25
    assert TRIP.access == BASELINE_ACCESS == 15.0
    assert TRIP.person.migrant and TRIP.person.full_time


def test_calibrated_baseline_in_band():
    assert 0.72 <= transit_probability(TRIP, PARAMS, M3) <= 0.83


def test_unchanged_fare_gives_zero_gain():
    assert np.all(sweep_fare(TRIP, PARAMS, (3.25, 3.25), spec=M3).gains == 0.0)


def test_unchanged_access_gives_zero_gain():
    assert np.all(sweep_access(TRIP, PARAMS, (15, 15), spec=M3).gains == 0.0)


def test_sweeps_are_monotone():
    fare = sweep_fare(TRIP, PARAMS, (3.25, 2.5, 1.5, 0.75, 0.0), spec=M3)
    access = sweep_access(TRIP, PARAMS, (15, 12, 10, 5, 0), spec=M3)
    assert np.all(np.diff(fare.percent, axis=0) >= 0)
    assert np.all(np.diff(access.percent, axis=0) >= 0)


def test_access_gain_at_least_double_fare_gain():
    fare = sweep_fare(TRIP, PARAMS, spec=M3)
    access = sweep_access(TRIP, PARAMS, spec=M3)
    assert np.all(access.gains / fare.gains >= 2)


@pytest.mark.parametrize("grid", [(1.0, 2.0), (-1.0,), ()])
def test_bad_fare_grids(grid):
    with pytest.raises(ValueError):
        sweep_fare(TRIP, PARAMS, grid, spec=M3)


def test_access_grid_must_start_at_baseline():
    with pytest.raises(ValueError):
        sweep_access(TRIP, PARAMS, (10, 5), spec=M3)


def test_zero_integration_effect_gives_flat_curve():
    flat = PARAMS.updated(b_integ_pt=0.0, b_integ_active=0.0)
    curve = integration_gradient(TRIP, flat, spec=M3, steps=9)
    assert np.ptp(curve.transit) < 1e-12


def test_negative_integration_effect_strictly_decreasing():
    assert PARAMS["b_integ_pt"] < 0
    curve = integration_gradient(TRIP, PARAMS, spec=M3, steps=21)
    assert np.all(np.diff(curve.transit) < 0)
    assert 0.04 <= curve.swing <= 0.06


def test_probabilities_sum_to_one():
    curve = integration_gradient(TRIP, PARAMS, spec=M3, steps=5)
    total = sum(curve.probabilities[m] for m in RP_MODES)
    np.testing.assert_allclose(100 * total, 100.0, atol=0.01)
    table = sweep_fare(TRIP, PARAMS, spec=M3)
    assert np.all((table.percent >= 0) & (table.percent <= 100))


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, -1e-3))
def test_integration_gap_persists_at_free_fast_transit(beta):
    # isolate the transit term; the active-mode integration term moves shares on its own
    params = PARAMS.updated(b_integ_pt=beta, b_integ_active=0.0)
    trip = TRIP.with_fare(0.0).with_access(0.0)
    low = transit_probability(trip.at_integration(-1), params, M3)
    high = transit_probability(trip.at_integration(1), params, M3)
    assert low - high > 0


def test_gap_persists_under_published_estimates():
    trip = TRIP.with_fare(0.0).with_access(0.0)
    assert transit_probability(trip.at_integration(-1), PARAMS, M3) > transit_probability(
        trip.at_integration(1), PARAMS, M3)


def test_mixed_spec_rejected():
    with pytest.raises(ValueError):
        mode_probabilities(TRIP, None, ModelSpec.load("M2"))


def test_series_file(tmp_path):
    curve = integration_gradient(TRIP, PARAMS, spec=M3, steps=3)
    curve.write_series(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "step,level_sd,mode,probability"
    assert len(lines) == 1 + 3 * len(RP_MODES)


def test_table_formatting():
    text = sweep_fare(TRIP, PARAMS, spec=M3).format()
    assert text.splitlines()[0].split()[-3:] == ["Mean", "+1", "SD"]
    assert text.splitlines()[-1].startswith("Gain (pp)")
