from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modechoice.alternatives import Mode
from modechoice.analysis import (conditional_all, conditional_parameters, population_mean_cost, vot_mnl,
                                 vot_ratio_mxl, vot_table)
from modechoice.data import PersonProfile
from modechoice.halton import halton_draws
from modechoice.model import ModelSpec, published_parameters
from modechoice.mxl import realize_random_params

from oracles import obs, toy_dataset, toy_params

M2 = ModelSpec.load("M2")


@pytest.mark.parametrize("bt, ba, bc, ivtt, walk", [
    (-0.361, -0.461, -0.766, 28.3, 36.1),
    (-0.347, -0.455, -0.801, 26.0, 34.1),
])
def test_published_mnl_values_of_time(bt, ba, bc, ivtt, walk):
    got = vot_mnl(bt, ba, bc)
    assert got[0] == pytest.approx(ivtt, abs=0.05)
    assert got[1] == pytest.approx(walk, abs=0.05)


def test_unit_ratio_is_sixty():
    assert vot_mnl(-0.5, -0.5, -0.5) == (60.0, 60.0)


def test_zero_cost_coefficient():
    with pytest.raises(ZeroDivisionError):
        vot_mnl(-0.3, -0.3, 0.0)


@pytest.mark.parametrize("mu, delta, ratio", [(-0.848, 0.556, 0.344), (-0.798, 0.525, 0.342), (-0.5, 0.0, 1.0)])
def test_mixed_ratio(mu, delta, ratio):
    assert vot_ratio_mxl(mu, delta) == pytest.approx(ratio, abs=5e-4)
    assert round(vot_ratio_mxl(mu, delta), 2) == round(ratio, 2)


def test_mixed_ratio_zero_mean():
    with pytest.raises(ZeroDivisionError):
        vot_ratio_mxl(0.0, 0.5)


@pytest.mark.parametrize("mu, sigma, mean", [(0.0, 0.0, -1.0), (-2.130, 1.724, -0.525), (-2.039, 1.697, -0.549)])
def test_population_mean_cost(mu, sigma, mean):
    assert population_mean_cost(mu, sigma) == pytest.approx(mean, abs=5e-4)


finite = st.floats(min_value=-20, max_value=5)


@given(finite, st.floats(min_value=0, max_value=4))
def test_population_mean_cost_negative(mu, sigma):
    assert population_mean_cost(mu, sigma) < 0


@given(st.floats(-5, -1e-3), st.floats(-5, -1e-3), st.floats(1e-3, 1e3))
def test_vot_scale_invariant(bt, bc, k):
    assert vot_mnl(k * bt, k * bt, k * bc)[0] == pytest.approx(vot_mnl(bt, bt, bc)[0], rel=1e-12)


def test_vot_table_rows():
    rows, ratios = vot_table({"M1": published_parameters("M1"), "M2": published_parameters("M2")})
    assert [r.group for r in rows] == ["all", "Canadian-born", "immigrant"]
    assert round(rows[0].ivtt, 1) == 28.3
    assert round(ratios["M2"], 2) == 0.34


PERSON = PersonProfile("a", car_owned=True, integration_raw=5.0)
PARAMS = toy_params(M2, sigma_time=1.0)


def test_single_draw_posterior_is_that_draw():
    z = np.array([[0.3, -0.7]])
    ds = toy_dataset()
    person = ds.persons[0]
    bt, bc = conditional_parameters(ds.by_person[person.person_id], PARAMS, z, M2, person)
    et, ec = realize_random_params(0.3, -0.7, person, PARAMS)
    assert (bt, bc) == pytest.approx((float(et), float(ec)), abs=1e-15)


def test_no_observations_gives_prior_average():
    z = np.random.default_rng(0).normal(size=(200, 2))
    bt, bc = conditional_parameters((), PARAMS, z, M2, PERSON)
    et, ec = realize_random_params(z[:, 0], z[:, 1], PERSON, PARAMS)
    assert bt == pytest.approx(float(np.mean(et)), abs=1e-14)
    assert bc == pytest.approx(float(np.mean(ec)), abs=1e-14)


def _fastest_chooser(n=6):
    # car is always faster and equally priced; the person always takes it
    return tuple(obs(f"f{t}", "a", Mode.CAR, {Mode.CAR: (3.0, 10.0, 0, 0), Mode.BUS: (3.0, 40.0, 0, 0)})
                 for t in range(n))


def test_fastest_chooser_posterior_more_time_sensitive():
    z = halton_draws(["a"], 2, 2000).for_person("a")
    bt, _ = conditional_parameters(_fastest_chooser(), PARAMS, z, M2, PERSON)
    prior = float(np.mean(realize_random_params(z[:, 0], z[:, 1], PERSON, PARAMS)[0]))
    assert bt < prior
    # brute force: reweight draws by the two-alternative panel probability
    btr, _ = realize_random_params(z[:, 0], z[:, 1], PERSON, PARAMS)
    p_car = 1 / (1 + np.exp(PARAMS["asc_bus"] + btr * 3.0))
    w = p_car**6 / np.sum(p_car**6)
    assert bt == pytest.approx(float(w @ btr), abs=1e-10)


def test_posterior_within_draw_hull():
    ds = toy_dataset()
    draws = halton_draws([p.person_id for p in ds.persons], 2, 300)
    for c in conditional_all(ds, PARAMS, draws, M2):
        person = next(p for p in ds.persons if p.person_id == c.person_id)
        z = draws.for_person(c.person_id)
        bt, bc = realize_random_params(z[:, 0], z[:, 1], person, PARAMS)
        assert bt.min() <= c.beta_T <= bt.max()
        assert bc.min() <= c.beta_C <= bc.max()
        assert math.isfinite(c.vot) and c.vot > 0
