"""Observation-level k-fold cross-validation with model-specific prediction rules."""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alternatives import MODES, Mode
from .analysis import population_mean_cost
from .data import ChoiceObservation, Dataset, PersonProfile
from .halton import DrawMatrix, halton_draws
from .model import ModelSpec, ParameterVector
from .utility import build_design, systematic_utility, utilities

log = logging.getLogger(__name__)


def make_folds(dataset: Dataset, k: int = 5, seed: int = 0) -> dict[str, int]:
    """Assign each RP observation to a fold in ``1..k``.

    Within each person the RP observations are shuffled with a per-person
    seeded stream and dealt round-robin, starting at a random fold so fold
    sizes stay balanced across persons. SP observations get no fold.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    streams = np.random.SeedSequence(seed).spawn(len(dataset.persons))
    folds: dict[str, int] = {}
    for p, ss in zip(dataset.persons, streams):
        rng = np.random.default_rng(ss)
        rp = [o.obs_id for o in dataset.by_person[p.person_id] if o.source == "RP"]
        order = rng.permutation(len(rp))
        offset = int(rng.integers(k))
        for pos, i in enumerate(order):
            folds[rp[i]] = (pos + offset) % k + 1
    return folds


def prediction_coefficients(params: ParameterVector, spec: ModelSpec, migrant) -> tuple:
    """Time and cost coefficients used for prediction (population means under mixed logit)."""
    if not spec.is_mixed:
        return params["b_time"], params["b_cost"]
    beta_t = params["mu_time"] + params["delta_mig"] * np.asarray(migrant, dtype=float)
    return beta_t, population_mean_cost(params["mu_cost"], params["sigma_cost"])


def predict_mode(obs: ChoiceObservation, person: PersonProfile, params: ParameterVector, spec: ModelSpec) -> Mode:
    """Alternative with the highest systematic utility at scale 1; ties go to the earlier mode."""
    bt, bc = prediction_coefficients(params, spec, float(person.migrant))
    best, best_v = None, -math.inf
    for m in MODES:
        a = obs.attributes.get(m)
        if a is None or not a.available:
            continue
        v = systematic_utility(obs, person, params, float(bt), float(bc), spec, m)
        if v > best_v:
            best, best_v = m, v
    return best


def predict_indices(dataset: Dataset, params: ParameterVector, spec: ModelSpec) -> np.ndarray:
    """Vectorized :func:`predict_mode` over ``dataset.arrays`` order (mode indices)."""
    a = dataset.arrays
    design = build_design(a, spec)
    if spec.is_mixed:
        bt, bc = prediction_coefficients(params, spec, a.mig)
        v = utilities(design, params, bt, np.full(a.n_obs, bc), scale_sp=False)
    else:
        v = utilities(design, params, scale_sp=False)
    return np.argmax(v, axis=1)  # first maximum wins


def accuracy(dataset: Dataset, params: ParameterVector, spec: ModelSpec) -> float:
    a = dataset.arrays
    rp = ~a.is_sp
    if not rp.any():
        return float("nan")
    return float(np.mean(predict_indices(dataset, params, spec)[rp] == a.chosen[rp]))


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    accuracy: float | None
    estimates: dict[str, float] | None
    error: str | None = None


@dataclass
class CVReport:
    model: str
    k: int
    seed: int
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds if f.accuracy is not None]

    @property
    def mean(self) -> float:
        acc = self.accuracies
        return float(np.mean(acc)) if acc else float("nan")

    @property
    def sd(self) -> float:
        """Sample standard deviation over successful folds."""
        acc = self.accuracies
        return float(statistics.stdev(acc)) if len(acc) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "k": self.k,
            "seed": self.seed,
            "mean_accuracy": self.mean,
            "sd_accuracy": self.sd,
            "folds": [vars(f) for f in self.folds],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def summary(self) -> str:
        lines = [f"{self.model}: CV accuracy {100 * self.mean:.1f} ± {100 * self.sd:.1f}%"]
        for f in self.folds:
            acc = "failed: " + (f.error or "") if f.accuracy is None else f"{100 * f.accuracy:.1f}%"
            lines.append(f"  fold {f.fold}: train {f.n_train}, test {f.n_test}, {acc}")
        return "\n".join(lines)


def cross_validate(
    dataset: Dataset,
    spec: ModelSpec,
    k: int = 5,
    seed: int = 0,
    *,
    full_result=None,
    draws: DrawMatrix | None = None,
    **estimate_kwargs,
) -> CVReport:
    """Re-estimate on k-1 folds (plus all SP) and score accuracy on the held-out RP fold.

    Each fold starts from the full-sample estimates, computed here when
    ``full_result`` is not given. Mixed logit folds reuse one draw matrix
    built for all persons. A fold whose estimation fails is recorded with its
    error and the remaining folds still run.
    """
    from .estimation import estimate

    if spec.is_mixed and draws is None:
        draws = halton_draws([p.person_id for p in dataset.persons], 2,
                             estimate_kwargs.pop("n_draws", None) or spec.draws,
                             seed=estimate_kwargs.pop("draw_seed", None))
    if full_result is None:
        full_result = estimate(dataset, spec, draws=draws, **estimate_kwargs)
    folds = make_folds(dataset, k, seed)
    report = CVReport(spec.label, k, seed)
    for f in range(1, k + 1):
        train = [o for o in dataset.observations if folds.get(o.obs_id) != f]
        test = [o for o in dataset.observations if folds.get(o.obs_id) == f]
        if not test:
            report.folds.append(FoldResult(f, len(train), 0, None, None, "empty test fold"))
            continue
        try:
            res = estimate(dataset.with_observations(train), spec, start=full_result.estimates,
                           draws=draws, **estimate_kwargs)
            acc = accuracy(dataset.with_observations(test), res.estimates, spec)
            report.folds.append(FoldResult(f, len(train), len(test), acc, res.estimates.as_dict()))
        except Exception as exc:  # noqa: BLE001 - recorded per fold
            log.warning("fold %d failed: %s", f, exc)
            report.folds.append(FoldResult(f, len(train), len(test), None, None, f"{type(exc).__name__}: {exc}"))
    return report
