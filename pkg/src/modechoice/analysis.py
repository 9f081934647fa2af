"""Values of travel time and person-level conditional coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ChoiceObservation, Dataset, PersonProfile
from .halton import DrawMatrix
from .mnl import log_probabilities
from .model import ModelSpec, ParameterVector
from .mxl import SimulationUnderflowError, realize_random_params
from .utility import build_design


def vot_mnl(beta_T: float, beta_A: float, beta_C: float) -> tuple[float, float]:
    """In-vehicle and walk/access values of time in CAD per hour.

    Time and cost share the same /10 scaling, so the coefficient ratio is in
    CAD per minute; any common utility scale cancels.
    """
    if beta_C == 0:
        raise ZeroDivisionError("cost coefficient is zero")
    return beta_T / beta_C * 60.0, beta_A / beta_C * 60.0


def vot_ratio_mxl(mu_T: float, delta_mig: float) -> float:
    """Ratio of immigrant to Canadian-born mean time sensitivity."""
    if mu_T == 0:
        raise ZeroDivisionError("mu_T is zero")
    return (mu_T + delta_mig) / mu_T


def population_mean_cost(mu_C: float, sigma_C: float) -> float:
    """Mean of the negative lognormal cost coefficient."""
    return -math.exp(mu_C + 0.5 * sigma_C**2)


@dataclass(frozen=True)
class ConditionalCoefficients:
    person_id: str
    beta_T: float
    beta_C: float

    @property
    def vot(self) -> float:
        """Ratio of posterior means, CAD per hour."""
        return self.beta_T / self.beta_C * 60.0


def conditional_parameters(person_observations: Sequence[ChoiceObservation], params: ParameterVector,
                           person_draws: np.ndarray, spec: ModelSpec | None = None,
                           person: PersonProfile | None = None) -> tuple[float, float]:
    """Posterior mean time and cost coefficients of one person.

    Each draw is weighted by the person's panel likelihood at that draw.
    ``person_draws`` has shape (R, 2) with time and cost normals.
    """
    z = np.asarray(person_draws, dtype=float)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError("person_draws must have shape (R, 2)")
    if person is None:
        raise ValueError("person profile required")
    bT, bC = realize_random_params(z[:, 0], z[:, 1], person, params)
    bT, bC = np.atleast_1d(bT), np.atleast_1d(bC)
    if not person_observations:
        return float(bT.mean()), float(bC.mean())
    spec = spec or ModelSpec.load("M4" if "mu_sp" in params else "M2")
    ds = Dataset((person,), tuple(person_observations))
    ll = _draw_logliks(ds, params, spec, bT, bC)
    mx = ll.max()
    if not np.isfinite(mx):
        raise SimulationUnderflowError(f"panel likelihood zero at every draw for person {person.person_id}")
    w = np.exp(ll - mx)
    w /= w.sum()
    return float(w @ bT), float(w @ bC)


def _draw_logliks(ds: Dataset, params: ParameterVector, spec, bT: np.ndarray, bC: np.ndarray) -> np.ndarray:
    """Per-draw panel log-likelihood of a single-person dataset."""
    a = ds.arrays
    design = build_design(a, spec)
    F = design.fixed_utility(np.array([params[n] for n in design.names]))
    scale = np.where(a.is_sp, params.get("mu_sp", 1.0), 1.0)[None, :, None]
    v = scale * (F[None] + bT[:, None, None] * design.time[None] + bC[:, None, None] * design.cost[None])
    v = np.where(a.avail[None], v, -np.inf)
    lp = log_probabilities(v.reshape(-1, v.shape[2])).reshape(v.shape)
    return lp[:, np.arange(a.n_obs), a.chosen].sum(axis=1)


def conditional_all(dataset: Dataset, params: ParameterVector, draws: DrawMatrix, spec) -> list[ConditionalCoefficients]:
    """Posterior means for every person in ``dataset``."""
    out = []
    for p in dataset.persons:
        obs = dataset.by_person[p.person_id]
        bt, bc = conditional_parameters(obs, params, draws.for_person(p.person_id), spec, p)
        out.append(ConditionalCoefficients(p.person_id, bt, bc))
    return out


@dataclass(frozen=True)
class VotRow:
    model: str
    group: str
    ivtt: float | None
    walk: float | None


def vot_table(estimates: dict[str, ParameterVector]) -> tuple[list[VotRow], dict[str, float]]:
    """VOT rows for MNL models and immigrant/Canadian-born ratios for mixed logit models."""
    rows: list[VotRow] = []
    ratios: dict[str, float] = {}
    for model, pv in estimates.items():
        if "b_time" in pv:
            ivtt, walk = vot_mnl(pv["b_time"], pv["b_access"], pv["b_cost"])
            rows.append(VotRow(model, "all", ivtt, walk))
        elif "mu_time" in pv:
            ratios[model] = vot_ratio_mxl(pv["mu_time"], pv["delta_mig"])
            mean_c = population_mean_cost(pv["mu_cost"], pv["sigma_cost"])
            rows.append(VotRow(model, "Canadian-born", pv["mu_time"] / mean_c * 60.0, pv["b_access"] / mean_c * 60.0))
            rows.append(VotRow(model, "immigrant", (pv["mu_time"] + pv["delta_mig"]) / mean_c * 60.0,
                               pv["b_access"] / mean_c * 60.0))
    return rows, ratios


def format_vot_table(rows: Sequence[VotRow], ratios: dict[str, float]) -> str:
    lines = [f"{'Model':<24}{'Group':<16}{'IVTT (CAD/hr)':>15}{'Walk (CAD/hr)':>15}"]
    for r in rows:
        iv = "" if r.ivtt is None else f"{r.ivtt:.1f}"
        wk = "" if r.walk is None else f"{r.walk:.1f}"
        lines.append(f"{r.model:<24}{r.group:<16}{iv:>15}{wk:>15}")
    for model, ratio in ratios.items():
        lines.append(f"{model:<24}{'Ratio (imm./Can.-born)':<31}{ratio:>15.2f}")
    return "\n".join(lines)
