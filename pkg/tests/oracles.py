"""Builders and independent reference computations shared by the test modules.

The oracles here deliberately avoid the package's utility and likelihood code:
they evaluate utilities by hand from plain numbers.
"""

from __future__ import annotations

import numpy as np

from modechoice.alternatives import RP_MODES, Mode
from modechoice.data import AlternativeAttributes, ChoiceObservation, Dataset, PersonProfile
from modechoice.model import ModelSpec, ParameterVector


def obs(obs_id: str, person_id: str, chosen: Mode, attrs: dict, source: str = "RP", **kw) -> ChoiceObservation:
    """Observation from ``{mode: (cost, ivtt, walk, dist)}``; absent modes are left out."""
    attributes = {Mode.parse(m): AlternativeAttributes(*a) if isinstance(a, tuple) else a for m, a in attrs.items()}
    return ChoiceObservation(obs_id, person_id, source, Mode.parse(chosen), attributes, **kw)


def all_modes(cost=0.0, ivtt=0.0, walk=0.0, dist=0.0) -> dict:
    return {m: (0.0 if m in (Mode.WALK, Mode.BICYCLE) else cost, ivtt,
                walk if m in (Mode.BUS, Mode.SUBWAY, Mode.TRAIN) else 0.0, dist) for m in RP_MODES}


def random_dataset(n_persons: int, n_obs: int, seed: int, n_alts: int | None = None,
                   sp_share: float = 0.0) -> Dataset:
    """Random attributes, random availability (at least two modes), random choices among available."""
    rng = np.random.default_rng(seed)
    persons = []
    observations = []
    raw = rng.uniform(1, 10, n_persons)
    centred = raw - raw.mean()
    for i in range(n_persons):
        p = PersonProfile(f"p{i}", migrant=bool(rng.random() < 0.3), full_time=bool(rng.random() < 0.6),
                          student=bool(rng.random() < 0.2), child_0_10=bool(rng.random() < 0.3),
                          safe=bool(rng.random() < 0.5), cycling_friendly=bool(rng.random() < 0.4),
                          car_owned=True, bike_owned=True, integration_raw=float(raw[i]),
                          integration_centred=float(centred[i]))
        persons.append(p)
        for t in range(n_obs):
            sp = rng.random() < sp_share
            modes = list(RP_MODES) + ([Mode.EMOBILITY] if sp else [])
            avail = rng.random(len(modes)) < 0.75
            if n_alts is not None:
                avail = np.zeros(len(modes), bool)
                avail[rng.choice(len(modes), n_alts, replace=False)] = True
            if avail.sum() < 2:
                avail[rng.choice(len(modes), 2, replace=False)] = True
            attrs = {}
            for m, a in zip(modes, avail):
                cost = 0.0 if m in (Mode.WALK, Mode.BICYCLE) else float(rng.uniform(0, 15))
                walk = float(rng.uniform(0, 20)) if m in (Mode.BUS, Mode.SUBWAY, Mode.TRAIN, Mode.EMOBILITY) else 0.0
                attrs[m] = AlternativeAttributes(cost, float(rng.uniform(1, 60)), walk, float(rng.uniform(0.2, 30)),
                                                 bool(a))
            chosen = modes[int(rng.choice(np.flatnonzero(avail)))]
            observations.append(ChoiceObservation(
                f"p{i}-{t}", p.person_id, "SP" if sp else "RP", chosen, attrs,
                purpose_work_study=bool(rng.random() < 0.5), snow=bool(rng.random() < 0.2)))
    return Dataset(tuple(persons), tuple(observations))


def random_params(spec: ModelSpec, rng: np.random.Generator, scale: float = 0.5) -> ParameterVector:
    values = []
    for n in spec.parameters:
        if n in ("sigma_time", "sigma_cost"):
            values.append(float(rng.uniform(0.05, 1.0)))
        elif n == "mu_sp":
            values.append(float(rng.uniform(0.2, 1.5)))
        else:
            values.append(float(rng.normal(0, scale)))
    return ParameterVector(spec.parameters, values)


# ---------------------------------------------------------------- mixed logit toy set

# Three persons, two observations each, car versus bus only. Hyperparameters
# are kept moderate so 10,000 pseudo-random draws estimate each person's
# probability to well under the 1e-3 tolerance on the summed log-likelihood.
TOY_HYPER = {"mu_time": -0.848, "sigma_time": 0.40, "delta_mig": 0.556, "mu_cost": -2.13,
             "sigma_cost": 0.50, "asc_bus": -0.396}
# (migrant, [(car ivtt, car cost, bus ivtt, bus cost) in minutes/CAD, chosen 0=car 1=bus])
TOY_PANEL = [
    (False, [((20.0, 4.0, 21.0, 3.25), 0), ((20.0, 3.0, 20.5, 3.25), 1)]),
    (True, [((15.0, 3.5, 16.0, 3.25), 1), ((16.0, 3.0, 16.0, 3.25), 1)]),
    (False, [((30.0, 4.0, 30.5, 3.25), 0), ((25.0, 3.5, 26.0, 3.25), 0)]),
]


def toy_dataset() -> Dataset:
    persons, observations = [], []
    for i, (mig, rows) in enumerate(TOY_PANEL):
        persons.append(PersonProfile(f"t{i}", migrant=mig, car_owned=True, integration_raw=5.0))
        for t, ((tc, cc, tb, cb), ch) in enumerate(rows):
            observations.append(obs(f"t{i}-{t}", f"t{i}", Mode.CAR if ch == 0 else Mode.BUS,
                                    {Mode.CAR: (cc, tc, 0.0, 0.0), Mode.BUS: (cb, tb, 0.0, 0.0)}))
    return Dataset(tuple(persons), tuple(observations))


def toy_params(spec: ModelSpec, **overrides) -> ParameterVector:
    values = dict(TOY_HYPER, **overrides)
    return ParameterVector(spec.parameters, [values.get(n, 0.0) for n in spec.parameters])


def _toy_person_prob(mig: bool, rows, z_t, z_c, hyper) -> np.ndarray:
    bT = hyper["mu_time"] + hyper["delta_mig"] * mig + hyper["sigma_time"] * z_t
    bC = -np.exp(hyper["mu_cost"] + hyper["sigma_cost"] * z_c)
    p = 1.0
    for (tc, cc, tb, cb), ch in rows:
        v_car = bT * tc / 10 + bC * cc / 10
        v_bus = hyper["asc_bus"] + bT * tb / 10 + bC * cb / 10
        p_car = 1.0 / (1.0 + np.exp(v_bus - v_car))
        p = p * (p_car if ch == 0 else 1.0 - p_car)
    return p


def toy_quadrature_loglik(nodes: int = 20, **overrides) -> float:
    """Panel log-likelihood of the toy set by tensor Gauss-Hermite quadrature."""
    hyper = dict(TOY_HYPER, **overrides)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    total = 0.0
    for mig, rows in TOY_PANEL:
        p = _toy_person_prob(mig, rows, x[:, None], x[None, :], hyper)
        total += float(np.log(w @ p @ w))
    return total


def toy_point_mass_loglik(**overrides) -> float:
    """Toy log-likelihood when both random coefficients sit at their median (sigma = 0)."""
    hyper = dict(TOY_HYPER, **overrides)
    return float(sum(np.log(_toy_person_prob(mig, rows, 0.0, 0.0, hyper)) for mig, rows in TOY_PANEL))
