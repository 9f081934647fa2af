"""Synthetic populations and choice data generated from known parameters.

Attribute generators are simple lognormal/uniform families tuned so that
average trip characteristics by chosen mode look like a GPS travel diary
(long car and train trips, sub-kilometre walks, flat transit fares).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .alternatives import MODE_INDEX, MODES, N_ALT, Mode
from .data import (
    COST_SCALE, DIST_SCALE, PERIODS, SEASONS, TIME_SCALE, AlternativeAttributes, ChoiceArrays,
    ChoiceObservation, Dataset, PersonProfile, center_integration,
)
from .model import ModelSpec, ParameterVector
from .utility import build_design, utilities

DEFAULT_MARGINALS = {
    "migrant": 0.33,
    "full_time": 0.55,
    "student": 0.25,
    "child_0_10": 0.20,
    "safe": 0.70,
    "cycling_friendly": 0.40,
    "car_owned": 0.60,
    "bike_owned": 0.35,
    "car_observed": 0.10,  # observed car use among non-owners
}
INTEGRATION_MEANS = {True: 6.7, False: 8.5}
INTEGRATION_SPREAD = 1.5

WEATHER_SHARES = {"sunny": 0.45, "cloudy": 0.30, "rainy": 0.15, "snowy": 0.10}


def generate_population(n_persons: int, covariate_marginals: Mapping[str, float] | None = None,
                        seed: int = 0, integration_spread: float = INTEGRATION_SPREAD) -> list[PersonProfile]:
    """Independent Bernoulli covariates and a migrant-dependent integration index."""
    marg = dict(DEFAULT_MARGINALS)
    marg.update(covariate_marginals or {})
    for k, p in marg.items():
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"marginal {k}={p} is not a probability")
    if n_persons == 0:
        return []
    rng = np.random.default_rng(seed)
    cols = {k: rng.random(n_persons) < marg[k] for k in
            ("migrant", "full_time", "student", "child_0_10", "safe", "cycling_friendly", "car_owned", "bike_owned")}
    observed = rng.random(n_persons) < marg["car_observed"]
    means = np.where(cols["migrant"], INTEGRATION_MEANS[True], INTEGRATION_MEANS[False])
    raw = np.clip(means + integration_spread * rng.standard_normal(n_persons), 1.0, 10.0)
    centred = center_integration(raw)
    return [
        PersonProfile(
            person_id=f"p{i:04d}",
            migrant=bool(cols["migrant"][i]),
            full_time=bool(cols["full_time"][i]),
            student=bool(cols["student"][i]),
            child_0_10=bool(cols["child_0_10"][i]),
            safe=bool(cols["safe"][i]),
            cycling_friendly=bool(cols["cycling_friendly"][i]),
            car_owned=bool(cols["car_owned"][i]),
            bike_owned=bool(cols["bike_owned"][i]),
            car_observed=bool(cols["car_owned"][i] or observed[i]),
            integration_raw=float(raw[i]),
            integration_centred=float(centred[i]),
        )
        for i in range(n_persons)
    ]


def _trip_distance(rng, n):
    short = rng.random(n) < 0.45
    d = np.where(short, rng.lognormal(np.log(0.7), 0.6, n), rng.lognormal(np.log(6.0), 0.8, n))
    return np.clip(d, 0.1, 80.0)


def draw_attributes(rng: np.random.Generator, person: PersonProfile, n: int, emobility: bool = False):
    """Raw attribute arrays (cost CAD, ivtt min, walk min, dist km, avail) of shape (n, J)."""
    d = _trip_distance(rng, n)
    cost = np.zeros((n, N_ALT))
    ivtt = np.zeros((n, N_ALT))
    walk = np.zeros((n, N_ALT))
    dist = np.zeros((n, N_ALT))
    avail = np.zeros((n, N_ALT), dtype=bool)
    u = rng.uniform

    j = MODE_INDEX[Mode.CAR]
    dist[:, j] = 1.15 * d
    ivtt[:, j] = dist[:, j] / u(22, 40, n) * 60 + 2
    cost[:, j] = 0.75 * dist[:, j] + np.where(rng.random(n) < 0.3, u(2, 15, n), 0.0)
    avail[:, j] = person.car_owned or person.car_observed

    j = MODE_INDEX[Mode.BUS]
    dist[:, j] = 1.25 * d
    ivtt[:, j] = dist[:, j] / u(14, 20, n) * 60
    walk[:, j] = u(2, 12, n)
    cost[:, j] = rng.choice([3.25, 3.35, 3.50], n)
    avail[:, j] = (d >= 0.4) & (rng.random(n) < 0.9)

    j = MODE_INDEX[Mode.SUBWAY]
    dist[:, j] = 1.2 * d
    ivtt[:, j] = dist[:, j] / u(25, 35, n) * 60
    walk[:, j] = u(3, 18, n)
    cost[:, j] = 3.35
    avail[:, j] = (d >= 0.8) & (rng.random(n) < 0.55)

    j = MODE_INDEX[Mode.TRAIN]
    dist[:, j] = 1.05 * d
    ivtt[:, j] = dist[:, j] / u(45, 65, n) * 60 + 4
    walk[:, j] = u(5, 25, n)
    cost[:, j] = 3.5 + 0.15 * d
    avail[:, j] = (d > 4) & (rng.random(n) < 0.5)

    j = MODE_INDEX[Mode.WALK]
    dist[:, j] = 1.15 * d
    ivtt[:, j] = dist[:, j] / 4.8 * 60
    avail[:, j] = d < 10

    j = MODE_INDEX[Mode.BICYCLE]
    dist[:, j] = 1.2 * d
    ivtt[:, j] = dist[:, j] / u(12, 18, n) * 60
    avail[:, j] = person.bike_owned

    if emobility:
        j = MODE_INDEX[Mode.EMOBILITY]
        dist[:, j] = 1.1 * d
        ivtt[:, j] = dist[:, j] / u(13, 18, n) * 60
        walk[:, j] = u(1, 6, n)
        cost[:, j] = 1.0 + 0.35 * ivtt[:, j]
        avail[:, j] = (d < 15) & (rng.random(n) < 0.6)

    # guarantee a binary choice at least
    few = avail.sum(axis=1) < 2
    avail[few, MODE_INDEX[Mode.BUS]] = True
    few = avail.sum(axis=1) < 2
    avail[few, MODE_INDEX[Mode.WALK]] = True
    return cost, ivtt, walk, dist, avail


def _arrays_for(person: PersonProfile, cost, ivtt, walk, dist, avail, is_sp, tp_ws, snow) -> ChoiceArrays:
    n = len(cost)
    ones = np.ones(n)
    return ChoiceArrays(
        obs_ids=np.arange(n).astype(object), person_ids=(person.person_id,),
        person_idx=np.zeros(n, dtype=np.int64), offsets=np.array([0, n], dtype=np.int64),
        avail=avail, chosen=np.zeros(n, dtype=np.int64), is_sp=is_sp, sp_trigger=np.zeros(n, bool),
        cost=cost / COST_SCALE, ivtt=ivtt / TIME_SCALE, walk=walk / TIME_SCALE, dist=dist / DIST_SCALE,
        tp_ws=tp_ws.astype(float), snow=snow.astype(float),
        mig=ones * person.migrant, ft=ones * person.full_time, stu=ones * person.student,
        child=ones * person.child_0_10, safe=ones * person.safe, cyc_fr=ones * person.cycling_friendly,
        integ=ones * person.integration_centred, person_mig=np.array([float(person.migrant)]),
    )


def _person_coefficients(rng, person, params: ParameterVector, spec: ModelSpec):
    if not spec.is_mixed:
        return None, None
    z = rng.standard_normal(2)
    mean_t = params["mu_time"] + params["delta_mig"] * person.migrant
    return mean_t + params["sigma_time"] * z[0], -np.exp(params["mu_cost"] + params["sigma_cost"] * z[1])


def _choose(rng, v: np.ndarray, noise: bool) -> np.ndarray:
    if noise:
        v = v + rng.gumbel(0.0, 1.0, v.shape)
    return np.argmax(v, axis=1)


def simulate_choices(
    persons: Sequence[PersonProfile],
    true_params: ParameterVector,
    spec: ModelSpec,
    n_obs_per_person: int,
    seed: int = 0,
    *,
    sp_per_person: int = 0,
    noise: bool = True,
) -> Dataset:
    """Draw attributes and simulate choices from ``true_params``.

    Mixed logit specs give each person one draw of the time and cost
    coefficients, held for all of their observations. For joint specs,
    ``sp_per_person`` RP trips per person are flagged as SP triggers and each
    spawns one SP scenario pivoted on it, with e-mobility offered and
    utilities multiplied by the true SP scale.
    """
    if sp_per_person and not spec.joint:
        raise ValueError("SP observations need a joint spec")
    seeds = np.random.SeedSequence(seed).spawn(len(persons))
    observations: list[ChoiceObservation] = []
    for person, ss in zip(persons, seeds):
        rng = np.random.default_rng(ss)
        bT, bC = _person_coefficients(rng, person, true_params, spec)
        n = n_obs_per_person
        cost, ivtt, walk, dist, avail = draw_attributes(rng, person, n)
        tp_ws = rng.random(n) < 0.35
        weather = rng.choice(list(WEATHER_SHARES), n, p=list(WEATHER_SHARES.values()))
        snow = weather == "snowy"
        season = rng.choice(SEASONS, n)
        period = rng.choice(PERIODS, n)
        arr = _arrays_for(person, cost, ivtt, walk, dist, avail, np.zeros(n, bool), tp_ws, snow)
        v = utilities(build_design(arr, spec), true_params, bT, bC)
        chosen = _choose(rng, v, noise)
        triggers = set()
        if sp_per_person:
            triggers = set(rng.choice(n, size=min(sp_per_person, n), replace=False).tolist())
        for t in range(n):
            observations.append(_make_obs(
                f"{person.person_id}-{t:04d}", person, "RP", chosen[t], cost[t], ivtt[t], walk[t], dist[t],
                avail[t], tp_ws[t], snow[t], weather[t], season[t], period[t], t in triggers,
            ))
        if triggers:
            sp_obs = _simulate_sp(rng, person, sorted(triggers), cost, ivtt, walk, dist, avail,
                                  tp_ws, true_params, spec, bT, bC, noise)
            for k, (t, ch, c, iv, w, di, av) in enumerate(sp_obs):
                observations.append(_make_obs(
                    f"{person.person_id}-sp{k:03d}", person, "SP", ch, c, iv, w, di, av,
                    tp_ws[t], snow[t], weather[t], season[t], period[t], False,
                ))
    return Dataset(tuple(persons), tuple(observations))


def _simulate_sp(rng, person, trips, cost, ivtt, walk, dist, avail, tp_ws, params, spec, bT, bC, noise):
    m = len(trips)
    idx = np.array(trips)
    c, iv, w, di, av = (x[idx].copy() for x in (cost, ivtt, walk, dist, avail))
    # pivot the observed levels
    iv *= rng.uniform(0.75, 1.25, iv.shape)
    w *= rng.uniform(0.5, 1.2, w.shape)
    c *= rng.uniform(0.7, 1.3, c.shape)
    e_cost, e_ivtt, e_walk, e_dist, e_avail = draw_attributes(rng, person, m, emobility=True)
    j = MODE_INDEX[Mode.EMOBILITY]
    d_trip = di[:, MODE_INDEX[Mode.CAR]] / 1.15
    di[:, j] = 1.1 * d_trip
    iv[:, j] = di[:, j] / rng.uniform(13, 18, m) * 60
    w[:, j] = rng.uniform(1, 6, m)
    c[:, j] = 1.0 + 0.35 * iv[:, j]
    av[:, j] = rng.random(m) < 0.7
    few = av.sum(axis=1) < 2
    av[few, j] = True
    arr = _arrays_for(person, c, iv, w, di, av, np.ones(m, bool), tp_ws[idx], np.zeros(m, bool))
    v = utilities(build_design(arr, spec), params, bT, bC)
    chosen = _choose(rng, v, noise)
    return [(t, chosen[k], c[k], iv[k], w[k], di[k], av[k]) for k, t in enumerate(trips)]


def _make_obs(obs_id, person, source, chosen_j, cost, ivtt, walk, dist, avail, tp_ws, snow,
              weather, season, period, sp_trigger) -> ChoiceObservation:
    attrs = {}
    for j, m in enumerate(MODES):
        if m is Mode.EMOBILITY and source != "SP":
            continue
        if not avail[j] and m is Mode.EMOBILITY:
            continue
        attrs[m] = AlternativeAttributes(
            cost=0.0 if m in (Mode.WALK, Mode.BICYCLE) else float(cost[j]),
            ivtt=float(ivtt[j]),
            walk_access=float(walk[j]),
            distance=float(dist[j]),
            available=bool(avail[j]),
        )
    return ChoiceObservation(
        obs_id=obs_id, person_id=person.person_id, source=source, chosen=MODES[int(chosen_j)],
        attributes=attrs, purpose_work_study=bool(tp_ws), snow=bool(snow), weather=str(weather),
        season=str(season), period=str(period), sp_trigger=bool(sp_trigger),
    )


def bayes_accuracy(dataset: Dataset, true_params: ParameterVector, spec: ModelSpec, rp_only: bool = True) -> float:
    """Share of observations whose chosen mode is the argmax of the true systematic utility."""
    a = dataset.arrays
    design = build_design(a, spec)
    if spec.is_mixed:
        mean_t = true_params["mu_time"] + true_params["delta_mig"] * a.mig
        mean_c = -np.exp(true_params["mu_cost"] + 0.5 * true_params["sigma_cost"] ** 2)
        v = utilities(design, true_params, mean_t, np.full(a.n_obs, mean_c), scale_sp=False)
    else:
        v = utilities(design, true_params, scale_sp=False)
    hit = np.argmax(v, axis=1) == a.chosen
    mask = ~a.is_sp if rp_only else np.ones(a.n_obs, bool)
    return float(hit[mask].mean())


@dataclass(frozen=True)
class RecoveryRow:
    name: str
    true: float
    estimate: float
    bias: float
    se: float
    z: float
    flagged: bool


def recovery_report(true_params: ParameterVector | Mapping[str, float], estimated, threshold: float = 3.0) -> list[RecoveryRow]:
    """Bias and |z| = |estimate - truth| / robust SE for each free parameter."""
    truth = true_params.as_dict() if isinstance(true_params, ParameterVector) else dict(true_params)
    est = estimated.estimates.as_dict()
    if set(truth) != set(est):
        raise ValueError(f"parameter names differ: {sorted(set(truth) ^ set(est))}")
    rows = []
    for name in estimated.estimates.names:
        if name in estimated.estimates.frozen:
            continue
        b = est[name] - truth[name]
        se = estimated.robust_se[name]
        z = abs(b) / se if se > 0 else (0.0 if b == 0 else float("inf"))
        if not np.isfinite(se):
            z = float("inf")
        rows.append(RecoveryRow(name, truth[name], est[name], b, se, z, bool(z > threshold)))
    return rows
