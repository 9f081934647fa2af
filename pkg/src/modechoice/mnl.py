"""Multinomial logit probabilities and log-likelihood with analytic score."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .data import Dataset
from .model import LOG_PARAMETERS, ModelSpec, ParameterVector
from .utility import Design, build_design, check_params_in_spec


class ZeroProbabilityError(FloatingPointError):
    pass


def choice_probabilities(V: Mapping, availability: Mapping) -> dict:
    """Logit probabilities over the available alternatives.

    Unavailable alternatives get exactly 0. Utilities are shifted by their
    maximum before exponentiation.
    """
    keys = list(V)
    avail = [k for k in keys if availability.get(k, False)]
    if len(avail) < 2:
        raise ValueError("choice set needs at least two available alternatives")
    v = np.array([float(V[k]) for k in avail])
    e = np.exp(v - v.max())
    p = e / e.sum()
    out = {k: 0.0 for k in keys}
    out.update({k: float(pk) for k, pk in zip(avail, p)})
    return out


def probabilities(v: np.ndarray) -> np.ndarray:
    """Row-wise logit probabilities for an (n, J) array with -inf for unavailable."""
    vmax = np.max(v, axis=1, keepdims=True)
    e = np.exp(v - vmax)
    return e / e.sum(axis=1, keepdims=True)


def log_probabilities(v: np.ndarray) -> np.ndarray:
    vmax = np.max(v, axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        shifted = v - vmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class MNLLikelihood:
    """Log-likelihood of an MNL spec over an internal parameter vector.

    The internal vector follows ``spec.parameters``; ``mu_sp`` is stored as
    its logarithm.
    """

    def __init__(self, dataset: Dataset, spec: ModelSpec, design: Design | None = None):
        if spec.is_mixed:
            raise ValueError("MNLLikelihood needs an MNL spec")
        self.spec = spec
        self.names = spec.parameters
        self.arrays = dataset.arrays
        self.design = design if design is not None else build_design(self.arrays, spec)
        self._util_idx = np.array([self.names.index(n) for n in self.design.names], dtype=int)
        self._mu_idx = self.names.index("mu_sp") if "mu_sp" in self.names else None
        a = self.arrays
        self._rows = np.arange(a.n_obs)
        self._Xch = self.design.X[self._rows, a.chosen, :]

    @property
    def n_groups(self) -> int:
        return self.arrays.n_persons

    def _utilities(self, theta):
        a = self.arrays
        b = theta[self._util_idx]
        raw = self.design.fixed_utility(b)
        scale = np.ones(a.n_obs)
        if self._mu_idx is not None:
            scale[a.is_sp] = np.exp(theta[self._mu_idx])
        v = np.where(a.avail, raw * scale[:, None], -np.inf)
        return v, scale

    def obs_loglik(self, theta) -> np.ndarray:
        v, _ = self._utilities(np.asarray(theta, float))
        lp = log_probabilities(v)[self._rows, self.arrays.chosen]
        bad = ~np.isfinite(lp)
        if bad.any():
            ids = list(self.arrays.obs_ids[bad][:5])
            raise ZeroProbabilityError(f"chosen alternative has zero probability in observations {ids}")
        return lp

    def loglik(self, theta) -> float:
        return float(np.sum(self.obs_loglik(theta)))

    def obs_scores(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, float)
        a = self.arrays
        v, scale = self._utilities(theta)
        lp_all = log_probabilities(v)
        lp = lp_all[self._rows, a.chosen]
        if not np.all(np.isfinite(lp)):
            ids = list(a.obs_ids[~np.isfinite(lp)][:5])
            raise ZeroProbabilityError(f"chosen alternative has zero probability in observations {ids}")
        P = np.exp(lp_all)
        S = np.zeros((a.n_obs, len(self.names)))
        xbar = np.einsum("nj,njk->nk", P, self.design.X)
        S[:, self._util_idx] = scale[:, None] * (self._Xch - xbar)
        if self._mu_idx is not None:
            vfin = np.where(a.avail, v, 0.0)
            dv = vfin[self._rows, a.chosen] - np.sum(P * vfin, axis=1)
            S[:, self._mu_idx] = np.where(a.is_sp, dv, 0.0)
        return lp, S

    def loglik_and_grad(self, theta) -> tuple[float, np.ndarray]:
        lp, S = self.obs_scores(theta)
        return float(np.sum(lp)), S.sum(axis=0)

    def person_scores(self, theta) -> np.ndarray:
        _, S = self.obs_scores(theta)
        return np.add.reduceat(S, self.arrays.offsets[:-1], axis=0)

    def predict_probabilities(self, theta) -> np.ndarray:
        v, _ = self._utilities(np.asarray(theta, float))
        return probabilities(v)


def _natural_grad(names, params: ParameterVector, grad_internal):
    g = np.array(grad_internal, dtype=float)
    for i, n in enumerate(names):
        if n in LOG_PARAMETERS:
            g[i] = g[i] / params[n]
    return g


def log_likelihood(dataset: Dataset, params: ParameterVector, spec: ModelSpec) -> tuple[float, np.ndarray]:
    """MNL log-likelihood and its gradient over the free (non-frozen) parameters.

    The gradient is taken with respect to the natural-scale parameters in
    ``spec.parameters`` order, skipping frozen ones.
    """
    check_params_in_spec(params, spec)
    params.check()
    full = ParameterVector(spec.parameters, [params.get(n) for n in spec.parameters])
    lik = MNLLikelihood(dataset, spec)
    ll, g = lik.loglik_and_grad(full.to_internal())
    g = _natural_grad(spec.parameters, full, g)
    free = np.array([n not in params.frozen for n in spec.parameters])
    return ll, g[free]


def null_loglikelihood(dataset: Dataset) -> float:
    n_avail = dataset.arrays.avail.sum(axis=1)
    return float(-np.sum(np.log(n_avail)))
