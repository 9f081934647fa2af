"""Panel mixed logit: random coefficients, trip capping and simulated likelihood.

The time coefficient is normal with an immigrant shift in its mean; the
cost coefficient is negative lognormal. Draws are fixed before estimation
(see :mod:`modechoice.halton`).
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence

import numpy as np

from . import kernels
from .data import ChoiceObservation, Dataset, PersonProfile
from .halton import DrawMatrix, halton_draws
from .model import ModelSpec, ParameterVector
from .utility import build_design, check_params_in_spec


class SimulationUnderflowError(FloatingPointError):
    pass


def realize_random_params(z_ivtt, z_cost, person: PersonProfile | float, params: ParameterVector):
    """Person-level time and cost coefficients at standard-normal draws.

    ``person`` may be a profile or the 0/1 immigrant indicator itself.
    Works elementwise on arrays of draws.
    """
    mig = float(person.migrant) if isinstance(person, PersonProfile) else float(person)
    sigma_t, sigma_c = params["sigma_time"], params["sigma_cost"]
    if sigma_t < 0 or sigma_c < 0:
        raise ValueError("standard deviations must be nonnegative")
    beta_t = (params["mu_time"] + params["delta_mig"] * mig) + sigma_t * np.asarray(z_ivtt, float)
    beta_c = -np.exp(params["mu_cost"] + sigma_c * np.asarray(z_cost, float))
    if np.ndim(beta_t) == 0:
        return float(beta_t), float(beta_c)
    return beta_t, beta_c


def _largest_remainder(sizes: Sequence[int], total: int) -> list[int]:
    n = sum(sizes)
    quotas = [total * s / n for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    left = total - sum(alloc)
    # ties keep stratum order
    order = sorted(range(len(sizes)), key=lambda k: (-(quotas[k] - alloc[k]), k))
    for k in order[:left]:
        alloc[k] += 1
    return alloc


def cap_trips(person_observations: Sequence[ChoiceObservation], cap: int = 300, seed=0) -> list[ChoiceObservation]:
    """Stratified subsample of a person's RP trips down to ``cap``; SP kept in full.

    Strata are (chosen mode, work/study purpose, weather). Each stratum gets a
    share proportional to its size, rounded by largest remainder. Retained
    observations keep their original order.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    rp = [i for i, o in enumerate(person_observations) if o.source == "RP"]
    if len(rp) <= cap:
        return list(person_observations)
    strata: dict[tuple, list[int]] = defaultdict(list)
    for i in rp:
        o = person_observations[i]
        strata[(o.chosen.value, o.purpose_work_study, o.weather)].append(i)
    keys = sorted(strata)
    alloc = _largest_remainder([len(strata[k]) for k in keys], cap)
    rng = np.random.default_rng(seed)
    keep = {i for i, o in enumerate(person_observations) if o.source == "SP"}
    for k, m in zip(keys, alloc):
        members = strata[k]
        picked = rng.choice(len(members), size=m, replace=False)
        keep.update(members[p] for p in picked)
    return [o for i, o in enumerate(person_observations) if i in keep]


def cap_dataset(ds: Dataset, cap: int = 300, seed: int = 0) -> Dataset:
    """Apply :func:`cap_trips` to every person with per-person seeded streams."""
    seeds = np.random.SeedSequence(seed).spawn(len(ds.persons))
    kept: list[ChoiceObservation] = []
    for p, ss in zip(ds.persons, seeds):
        kept.extend(cap_trips(ds.by_person[p.person_id], cap, np.random.default_rng(ss)))
    if len(kept) == ds.n_obs:
        return ds
    return ds.with_observations(kept)


class MXLLikelihood:
    """Panel simulated log-likelihood over an internal parameter vector.

    Internal order follows ``spec.parameters``; ``sigma_time``, ``sigma_cost``
    and ``mu_sp`` are stored as logarithms.
    """

    def __init__(self, dataset: Dataset, spec: ModelSpec, draws: DrawMatrix,
                 backend: str | None = None, gradient: str = "analytic", workers: int = 1):
        if not spec.is_mixed:
            raise ValueError("MXLLikelihood needs a mixed logit spec")
        if gradient not in ("analytic", "fd"):
            raise ValueError("gradient must be 'analytic' or 'fd'")
        self.spec = spec
        self.names = spec.parameters
        self.arrays = a = dataset.arrays
        self.design = build_design(a, spec)
        missing = [p for p in a.person_ids if p not in draws._index]
        if missing:
            raise ValueError(f"draws missing for persons {missing[:5]}")
        if draws.draws.shape[2] < 2:
            raise ValueError("draws must cover the time and cost dimensions")
        sub = draws.subset(a.person_ids)
        self.draws = sub
        self.zT = np.ascontiguousarray(sub.draws[:, :, 0])
        self.zC = np.ascontiguousarray(sub.draws[:, :, 1])
        self.backend = backend
        self.gradient = gradient
        self.workers = workers
        idx = {n: i for i, n in enumerate(self.names)}
        self._util_idx = np.array([idx[n] for n in self.design.names], dtype=int)
        self._idx = idx
        self._rows = np.arange(a.n_obs)
        self._Xch = self.design.X[self._rows, a.chosen, :]

    @property
    def n_groups(self) -> int:
        return self.arrays.n_persons

    def natural(self, theta) -> ParameterVector:
        return ParameterVector.from_internal(self.names, theta)

    def _run(self, params: ParameterVector, want_grad: bool):
        a = self.arrays
        b = np.array([params[n] for n in self.design.names])
        F = self.design.fixed_utility(b)
        mig = a.person_mig
        bT = (params["mu_time"] + params["delta_mig"] * mig)[:, None] + params["sigma_time"] * self.zT
        bC = -np.exp(params["mu_cost"] + params["sigma_cost"] * self.zC)
        scale = np.ones(a.n_obs)
        if "mu_sp" in params:
            scale[a.is_sp] = params["mu_sp"]
        ll, g, pbar, bad = kernels.panel_loglik(
            F, self.design.time, self.design.cost, a.avail, a.chosen, scale, a.is_sp,
            a.offsets, bT, bC, self.zT, self.zC, want_grad, backend=self.backend,
            workers=self.workers,
        )
        if bad >= 0 or not np.all(np.isfinite(ll)):
            pid = a.person_ids[bad] if bad >= 0 else a.person_ids[int(np.argmin(np.isfinite(ll)))]
            raise SimulationUnderflowError(f"simulated probability underflows to zero for person {pid}")
        return ll, g, pbar, scale

    def person_loglik(self, theta) -> np.ndarray:
        return self._run(self.natural(theta), False)[0]

    def loglik(self, theta) -> float:
        return float(np.sum(self.person_loglik(theta)))

    def person_scores(self, theta) -> np.ndarray:
        return self._scores(theta)[1]

    def _scores(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, float)
        if self.gradient == "fd":
            return self.person_loglik(theta), self._fd_person_scores(theta)
        params = self.natural(theta)
        a = self.arrays
        ll, g, pbar, scale = self._run(params, True)
        S = np.zeros((a.n_persons, len(self.names)))
        if len(self._util_idx):
            xbar = np.einsum("nj,njk->nk", pbar, self.design.X)
            obs = scale[:, None] * (self._Xch - xbar)
            S[:, self._util_idx] = np.add.reduceat(obs, a.offsets[:-1], axis=0)
        i = self._idx
        S[:, i["mu_time"]] = g[:, 0]
        S[:, i["sigma_time"]] = params["sigma_time"] * g[:, 1]
        S[:, i["delta_mig"]] = g[:, 0] * a.person_mig
        S[:, i["mu_cost"]] = g[:, 2]
        S[:, i["sigma_cost"]] = params["sigma_cost"] * g[:, 3]
        if "mu_sp" in i:
            S[:, i["mu_sp"]] = g[:, 4]
        return ll, S

    def _fd_person_scores(self, theta, h: float = 1e-5) -> np.ndarray:
        theta = np.asarray(theta, float)
        S = np.zeros((self.arrays.n_persons, len(theta)))
        for k in range(len(theta)):
            step = h * max(1.0, abs(theta[k]))
            up, dn = theta.copy(), theta.copy()
            up[k] += step
            dn[k] -= step
            S[:, k] = (self.person_loglik(up) - self.person_loglik(dn)) / (2 * step)
        return S

    def loglik_and_grad(self, theta) -> tuple[float, np.ndarray]:
        ll, S = self._scores(theta)
        return float(np.sum(ll)), S.sum(axis=0)


def panel_simulated_loglikelihood(dataset: Dataset, params: ParameterVector, draws: DrawMatrix,
                                  spec: ModelSpec, backend: str | None = None) -> float:
    """Sum over persons of the log simulated panel probability at ``params``."""
    check_params_in_spec(params, spec)
    params.check()
    lik = MXLLikelihood(dataset, spec, draws, backend=backend)
    full = ParameterVector(spec.parameters, [params.get(n) for n in spec.parameters])
    return float(np.sum(lik._run(full, False)[0]))


def default_draws(dataset: Dataset, n_draws: int = 500, seed: int | None = None) -> DrawMatrix:
    return halton_draws([p.person_id for p in dataset.persons], 2, n_draws, seed=seed)
