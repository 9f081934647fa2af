"""Systematic utility of every alternative under the four specifications.

The term table below is the single definition of which coefficient
multiplies which feature in which alternative. Both the scalar evaluator
(:func:`systematic_utility`) and the vectorized design builder
(:func:`build_design`) read from it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alternatives import MODE_INDEX, N_ALT, Mode
from .data import ChoiceArrays, ChoiceObservation, PersonProfile, scale_attributes
from .model import ModelSpec, ParameterVector, SpecError

TERMS: dict[Mode, tuple[tuple[str, str], ...]] = {
    Mode.CAR: (
        ("b_cost", "cost"), ("b_time", "ivtt"), ("b_dist_car", "dist"), ("b_work", "tp_ws"),
    ),
    Mode.BUS: (
        ("asc_bus", "one"), ("b_cost", "cost"), ("b_time", "ivtt"), ("b_access", "walk"),
        ("b_dist_pt", "dist"), ("b_child", "child"), ("b_integ_pt", "integ"),
    ),
    Mode.SUBWAY: (
        ("asc_sub", "one"), ("b_cost", "cost"), ("b_time", "ivtt"), ("b_access", "walk"),
        ("b_ft", "ft"), ("b_safe", "safe"), ("b_child", "child"), ("b_mig", "mig"),
        ("b_integ_pt", "integ"),
    ),
    Mode.TRAIN: (
        ("b_cost", "cost"), ("b_time", "ivtt"), ("b_access", "walk"), ("b_stu_train", "stu"),
        ("b_dist_train", "dist"), ("b_integ_pt", "integ"),
    ),
    # walk and bicycle: ivtt holds total travel time
    Mode.WALK: (
        ("asc_walk", "one"), ("b_time", "ivtt"), ("b_stu_walk", "stu"), ("b_dist_active", "dist"),
        ("b_integ_active", "integ"), ("b_snow", "snow"),
    ),
    Mode.BICYCLE: (
        ("asc_bike", "one"), ("b_time", "ivtt"), ("b_cycfr", "cyc_fr"), ("b_dist_active", "dist"),
        ("b_integ_active", "integ"), ("b_snow", "snow"),
    ),
    Mode.EMOBILITY: (
        ("asc_emob", "one"), ("b_cost", "cost"), ("b_time", "ivtt"), ("b_access", "walk"),
        ("b_dist_active", "dist"),
    ),
}

RANDOM_SLOTS = {"b_time": "time", "b_cost": "cost"}


def _scalar_feature(name: str, obs: ChoiceObservation, person: PersonProfile, alt: Mode) -> float:
    if name == "one":
        return 1.0
    if name in ("cost", "ivtt", "walk", "dist"):
        s = scale_attributes(obs.attributes[alt])
        return getattr(s, name)
    return float({
        "tp_ws": obs.purpose_work_study,
        "snow": obs.snow,
        "child": person.child_0_10,
        "ft": person.full_time,
        "stu": person.student,
        "mig": person.migrant,
        "safe": person.safe,
        "cyc_fr": person.cycling_friendly,
        "integ": person.integration_centred,
    }[name])


def check_params_in_spec(params: ParameterVector, spec: ModelSpec) -> None:
    extra = [n for n in params.names if n not in spec.parameters]
    if extra:
        raise SpecError(f"variable not in spec {spec.name}: {extra}")


def systematic_utility(
    obs: ChoiceObservation,
    person: PersonProfile,
    params: ParameterVector,
    beta_T_effective: float,
    beta_C_effective: float,
    spec: ModelSpec,
    alt: Mode,
) -> float:
    """Systematic utility of ``alt`` before any SP scaling.

    Time and cost coefficients are supplied by the caller (the estimates for
    MNL, per-draw realizations for mixed logit); ``params`` supplies the rest.
    """
    alt = Mode.parse(alt)
    if alt is Mode.EMOBILITY and obs.source != "SP":
        raise ValueError(f"observation {obs.obs_id}: e-mobility is not an RP alternative")
    if alt not in obs.attributes or not obs.attributes[alt].available:
        raise ValueError(f"observation {obs.obs_id}: {alt.value} unavailable")
    check_params_in_spec(params, spec)
    v = 0.0
    for pname, feat in TERMS[alt]:
        if pname == "b_time":
            coef = beta_T_effective
        elif pname == "b_cost":
            coef = beta_C_effective
        elif spec.includes(pname):
            coef = params[pname]
        else:
            continue
        v += coef * _scalar_feature(feat, obs, person, alt)
    return v


def apply_sp_scale(v, source: str, mu_sp: float):
    if not mu_sp > 0:
        raise ValueError("mu_sp must be positive")
    return v * mu_sp if source == "SP" else v


# --------------------------------------------------------------------------
# vectorized form


@dataclass(frozen=True)
class Design:
    """Feature arrays for one dataset under one spec.

    ``X[n, j, k]`` is the feature multiplying ``names[k]`` in alternative j.
    ``time`` and ``cost`` hold the features of the time and cost coefficients
    (used directly for mixed logit, where those coefficients are random).
    """

    names: tuple[str, ...]
    X: np.ndarray
    time: np.ndarray
    cost: np.ndarray
    arrays: ChoiceArrays

    def fixed_utility(self, coefs: np.ndarray) -> np.ndarray:
        if len(self.names) == 0:
            return np.zeros(self.time.shape)
        return self.X @ coefs


def _array_feature(name: str, a: ChoiceArrays, j: int) -> np.ndarray:
    if name == "one":
        return np.ones(a.n_obs)
    if name in ("cost", "ivtt", "walk", "dist"):
        return getattr(a, name)[:, j]
    return getattr(a, name)


def build_design(arrays: ChoiceArrays, spec: ModelSpec, names: tuple[str, ...] | None = None) -> Design:
    names = spec.utility_parameters if names is None else names
    k_index = {n: k for k, n in enumerate(names)}
    n = arrays.n_obs
    X = np.zeros((n, N_ALT, len(names)))
    time = np.zeros((n, N_ALT))
    cost = np.zeros((n, N_ALT))
    for alt, terms in TERMS.items():
        j = MODE_INDEX[alt]
        for pname, feat in terms:
            if pname == "b_time":
                time[:, j] = _array_feature(feat, arrays, j)
            elif pname == "b_cost":
                cost[:, j] = _array_feature(feat, arrays, j)
            if pname in k_index:
                X[:, j, k_index[pname]] = _array_feature(feat, arrays, j)
    return Design(tuple(names), X, time, cost, arrays)


def utilities(design: Design, params: ParameterVector, beta_T=None, beta_C=None,
              scale_sp: bool = True) -> np.ndarray:
    """(n, J) utilities with unavailable alternatives set to -inf.

    For mixed logit specs pass ``beta_T``/``beta_C`` (scalars or per-observation
    arrays); MNL specs read them from ``params``.
    """
    coefs = np.array([params[n] for n in design.names])
    v = design.fixed_utility(coefs)
    if beta_T is not None:
        v = v + np.reshape(beta_T, (-1, 1)) * design.time
    if beta_C is not None:
        v = v + np.reshape(beta_C, (-1, 1)) * design.cost
    if scale_sp and "mu_sp" in params:
        v = np.where(design.arrays.is_sp[:, None], params["mu_sp"] * v, v)
    return np.where(design.arrays.avail, v, -np.inf)
