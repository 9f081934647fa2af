"""Maximum likelihood driver, clustered sandwich covariance and fit statistics."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from . import kernels
from .data import Dataset
from .halton import DrawMatrix, halton_draws
from .mnl import MNLLikelihood, null_loglikelihood
from .model import PARAMETER_LABELS, ModelSpec, ParameterVector, internal_jacobian
from .mxl import MXLLikelihood, cap_dataset

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    """Optimization failure; ``theta`` holds the offending internal parameter vector."""

    def __init__(self, message: str, theta=None):
        super().__init__(message)
        self.theta = None if theta is None else np.array(theta, dtype=float)


class NonFiniteObjectiveError(EstimationError):
    pass


class IterationLimitError(EstimationError):
    pass


class SingularHessianError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        super().__init__(f"Hessian is singular (condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class Tolerances:
    gtol: float = 1e-5  # gradient max-norm
    ftol: float = 1e-9  # relative log-likelihood improvement
    maxiter: int = 1000
    newton_steps: int = 8
    max_step: float = 2.0  # largest coordinate move per BFGS step
    precondition: bool = True

    @classmethod
    def from_mapping(cls, d: Mapping | None) -> "Tolerances":
        return cls(**dict(d or {}))


@dataclass
class OptimizeResult:
    theta: np.ndarray
    ll: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    hessian: np.ndarray | None = None  # over free parameters


def numerical_hessian(grad_fn: Callable[[np.ndarray], np.ndarray], theta: np.ndarray,
                      free: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Symmetrized central-difference Jacobian of ``grad_fn`` restricted to ``free``."""
    idx = np.flatnonzero(free)
    H = np.zeros((len(idx), len(idx)))
    for col, k in enumerate(idx):
        h = rel_step * max(1.0, abs(theta[k]))
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        H[:, col] = (grad_fn(up)[idx] - grad_fn(dn)[idx]) / (2 * h)
    return 0.5 * (H + H.T)


def _bfgs(evaluate, x0, free, H0inv, tol: Tolerances):
    """Ascent BFGS on the free coordinates with backtracking line search.

    Trial points whose objective is not finite are treated as too long a step.
    Returns (theta, ll, g, iterations, status) with status 0 when a stopping
    test passed.
    """
    theta = x0.copy()
    ll, g = evaluate(theta)
    B = H0inv.copy()  # approximates the inverse information
    n = int(free.sum())
    for it in range(1, tol.maxiter + 1):
        gf = g[free]
        if np.max(np.abs(gf)) < tol.gtol:
            return theta, ll, g, it - 1, 0
        d = B @ gf
        if d @ gf <= 0:
            B = np.eye(n)
            d = gf.copy()
        big = np.max(np.abs(d))
        if big > tol.max_step:
            d *= tol.max_step / big
        t = 1.0
        accepted = False
        for _ in range(60):
            trial = theta.copy()
            trial[free] += t * d
            try:
                ll_t, g_t = evaluate(trial)
            except (NonFiniteObjectiveError, FloatingPointError):
                t *= 0.5
                continue
            if ll_t >= ll + 1e-4 * t * (d @ gf):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return theta, ll, g, it, 2
        s_vec = t * d
        y = -(g_t[free] - gf)  # gradient change of the negative objective
        rel = (ll_t - ll) / max(abs(ll), abs(ll_t), 1.0)
        theta, ll, g = trial, ll_t, g_t
        sy = s_vec @ y
        if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y):
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s_vec, y)
            B = V @ B @ V.T + rho * np.outer(s_vec, s_vec)
        if rel < tol.ftol or np.max(np.abs(g[free])) < tol.gtol:
            return theta, ll, g, it, 0
    return theta, ll, g, tol.maxiter, 1


def maximize(objective: Callable[[np.ndarray], tuple[float, np.ndarray]], start,
             frozen_mask=None, tolerances: Tolerances | None = None) -> OptimizeResult:
    """Maximize ``objective`` over the free coordinates of ``start``.

    BFGS runs until the gradient max-norm falls below ``gtol`` or the relative
    improvement of one step falls below ``ftol``. The initial inverse Hessian
    comes from a finite-difference Hessian at the start when that is negative
    definite. A few Newton steps on a fresh finite-difference Hessian then
    polish the optimum. Frozen coordinates never move.

    Raises
    ------
    NonFiniteObjectiveError
        The objective is not finite at the start point.
    IterationLimitError
        BFGS hit ``maxiter`` without meeting either test.
    """
    tol = tolerances or Tolerances()
    theta0 = np.array(start, dtype=float)
    frozen = np.zeros(len(theta0), bool) if frozen_mask is None else np.asarray(frozen_mask, bool)
    free = ~frozen
    cache: dict = {}

    def evaluate(th):
        key = th.tobytes()
        if key not in cache:
            with np.errstate(over="ignore", invalid="ignore"):
                ll, g = objective(th)
            g = np.asarray(g, dtype=float)
            if not np.isfinite(ll) or not np.all(np.isfinite(g)):
                raise NonFiniteObjectiveError(f"non-finite objective at theta={th.tolist()}", th)
            if len(cache) > 256:
                cache.clear()
            cache[key] = (float(ll), g)
        return cache[key]

    try:
        ll, g = evaluate(theta0)
    except FloatingPointError as exc:
        raise NonFiniteObjectiveError(f"objective not finite at start: {exc}", theta0) from exc
    if not free.any():
        return OptimizeResult(theta0, ll, g, 0, True, "no free parameters", np.zeros((0, 0)))

    def grad_fn(th):
        return evaluate(th)[1]

    n = int(free.sum())
    H0inv = np.eye(n)
    if tol.precondition:
        try:
            H = numerical_hessian(grad_fn, theta0, free)
            w = np.linalg.eigvalsh(H)
            if w.max() < 0:
                H0inv = np.linalg.inv(-H)
        except (NonFiniteObjectiveError, FloatingPointError, np.linalg.LinAlgError):
            pass

    theta, ll, g, iterations, status = _bfgs(evaluate, theta0, free, H0inv, tol)
    if status == 1:
        raise IterationLimitError(f"iteration cap {tol.maxiter} reached", theta)
    message = {0: "converged", 2: "line search failed"}[status]

    # Newton polish with one Hessian, refreshed only if the point moved
    H = numerical_hessian(grad_fn, theta, free)
    moved = False
    try:
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        Hinv = None
    for _ in range(tol.newton_steps if Hinv is not None else 0):
        gmax = np.max(np.abs(g[free]))
        if gmax < tol.gtol * 1e-3:
            break
        step = -Hinv @ g[free]
        if step @ g[free] <= 0:  # Hessian not negative definite here
            break
        improved = False
        t = 1.0
        for _ in range(20):
            trial = theta.copy()
            trial[free] += t * step
            try:
                ll_t, g_t = evaluate(trial)
            except (NonFiniteObjectiveError, FloatingPointError):
                t *= 0.5
                continue
            if ll_t >= ll - 1e-12 * abs(ll) and np.max(np.abs(g_t[free])) < gmax:
                theta, ll, g = trial, ll_t, g_t
                improved = moved = True
                break
            t *= 0.5
        iterations += 1
        if not improved:
            break
    if moved:
        H = numerical_hessian(grad_fn, theta, free)
    gnorm = float(np.max(np.abs(g[free])))
    converged = bool(gnorm < tol.gtol or status == 0)
    return OptimizeResult(theta, ll, g, iterations, converged, message, H)


def invert_information(hessian: np.ndarray) -> np.ndarray:
    """Inverse of the negative log-likelihood Hessian; raises on singularity."""
    A = -np.asarray(hessian, dtype=float)
    if A.size == 0:
        return A.copy()
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularHessianError(cond)
    return np.linalg.inv(A)


def robust_covariance(per_cluster_scores: np.ndarray, hessian_inverse: np.ndarray) -> np.ndarray:
    """Cluster sandwich ``Hinv (sum_n s_n s_n') Hinv * G/(G-1)``.

    ``hessian_inverse`` is the inverse of the information (negative Hessian);
    scores are summed within cluster, one row per cluster.
    """
    S = np.asarray(per_cluster_scores, dtype=float)
    Hinv = np.asarray(hessian_inverse, dtype=float)
    G = S.shape[0]
    if G < 2:
        raise ValueError("need at least two clusters")
    if not np.any(S):
        warnings.warn("all cluster scores are zero; covariance is degenerate", RuntimeWarning, stacklevel=2)
    meat = S.T @ S
    return Hinv @ meat @ Hinv * (G / (G - 1))


def fit_statistics(ll0: float, ll_final: float, n_params: int, n_obs: int | None = None) -> tuple[float, float]:
    """Return (adjusted rho-squared against ``ll0``, AIC)."""
    adj = 1.0 - (ll_final - n_params) / ll0
    aic = 2.0 * n_params - 2.0 * ll_final
    return adj, aic


@dataclass
class EstimationResult:
    estimates: ParameterVector
    robust_se: dict[str, float]
    robust_t: dict[str, float]
    ll0: float
    ll_final: float
    adj_rho2: float
    aic: float
    n_obs: int
    n_params: int
    converged: bool
    iterations: int
    gradient_norm: float
    model: str = ""
    n_persons: int = 0
    classical_se: dict[str, float] = field(default_factory=dict)
    covariance: np.ndarray | None = None  # natural scale, free parameters in order
    flags: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.estimates.names if n not in self.estimates.frozen)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": [
                {
                    "name": n,
                    "estimate": self.estimates[n],
                    "robust_se": self.robust_se.get(n),
                    "robust_t": self.robust_t.get(n),
                    "classical_se": self.classical_se.get(n),
                    "frozen": n in self.estimates.frozen,
                }
                for n in self.estimates.names
            ],
            "ll0": self.ll0,
            "ll_final": self.ll_final,
            "adj_rho2": self.adj_rho2,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "n_persons": self.n_persons,
            "n_params": self.n_params,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "flags": list(self.flags),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EstimationResult":
        rows = d["parameters"]
        names = [r["name"] for r in rows]
        est = ParameterVector(names, [r["estimate"] for r in rows], [r["name"] for r in rows if r.get("frozen")])

        def col(key):
            return {r["name"]: float(r[key]) for r in rows if r.get(key) is not None}

        cov = d.get("covariance")
        return cls(
            estimates=est, robust_se=col("robust_se"), robust_t=col("robust_t"),
            ll0=float(d["ll0"]), ll_final=float(d["ll_final"]), adj_rho2=float(d["adj_rho2"]),
            aic=float(d["aic"]), n_obs=int(d["n_obs"]), n_params=int(d["n_params"]),
            converged=bool(d["converged"]), iterations=int(d["iterations"]),
            gradient_norm=float(d["gradient_norm"]), model=d.get("model", ""),
            n_persons=int(d.get("n_persons", 0)), classical_se=col("classical_se"),
            covariance=None if cov is None else np.array(cov, dtype=float),
            flags=tuple(d.get("flags", ())), meta=dict(d.get("meta", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True))

    @classmethod
    def load(cls, path) -> "EstimationResult":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def format_table(self) -> str:
        """Fixed-width parameter table: label, estimate and robust t in parentheses."""
        lines = [f"{self.model or 'Model'}", f"{'Parameter':<28}{'Estimate':>10}{'(rob. t)':>12}"]
        for n in self.estimates.names:
            t = self.robust_t.get(n)
            tt = "(fixed)" if n in self.estimates.frozen else (f"({t:.2f})" if t is not None else "")
            lines.append(f"{PARAMETER_LABELS.get(n, n):<28}{self.estimates[n]:>10.3f}{tt:>12}")
        lines.append(f"{'LL(0)':<28}{self.ll0:>10.1f}")
        lines.append(f"{'LL(final)':<28}{self.ll_final:>10.1f}")
        lines.append(f"{'Adj. rho2(0)':<28}{self.adj_rho2:>10.3f}")
        lines.append(f"{'AIC':<28}{self.aic:>10.1f}")
        lines.append(f"{'Observations':<28}{self.n_obs:>10d}")
        lines.append(f"{'Parameters':<28}{self.n_params:>10d}")
        return "\n".join(lines)


def make_likelihood(dataset: Dataset, spec: ModelSpec, draws: DrawMatrix | None = None,
                    backend: str | None = None, gradient: str = "analytic", workers: int = 1):
    if spec.is_mixed:
        if draws is None:
            raise ValueError("mixed logit estimation needs draws")
        return MXLLikelihood(dataset, spec, draws, backend=backend, gradient=gradient, workers=workers)
    return MNLLikelihood(dataset, spec)


def prepare_data(dataset: Dataset, spec: ModelSpec, trip_cap: int | None = None, seed: int = 0) -> Dataset:
    """Apply the per-person trip cap for mixed logit specs."""
    if not spec.is_mixed:
        return dataset
    return cap_dataset(dataset, trip_cap or spec.trip_cap, seed)


def estimate(
    dataset: Dataset,
    spec: ModelSpec,
    *,
    start: ParameterVector | Mapping[str, float] | None = None,
    frozen: Iterable[str] = (),
    draws: DrawMatrix | None = None,
    n_draws: int | None = None,
    draw_seed: int | None = None,
    seed: int = 0,
    trip_cap: int | None = None,
    tolerances: Tolerances | None = None,
    backend: str | None = None,
    gradient: str = "analytic",
    workers: int = 1,
    apply_cap: bool = True,
) -> EstimationResult:
    """Estimate ``spec`` on ``dataset`` and compute person-clustered robust errors.

    For mixed logit specs the RP trip cap is applied first (seeded by
    ``seed``) and Halton draws are generated for the retained persons unless
    ``draws`` is given. ``frozen`` parameters stay at their start values.
    """
    flags: list[str] = []
    if spec.is_mixed and apply_cap:
        dataset = prepare_data(dataset, spec, trip_cap, seed)
    if spec.is_mixed and draws is None:
        draws = halton_draws([p.person_id for p in dataset.persons], 2, n_draws or spec.draws, seed=draw_seed)
    a = dataset.arrays
    if spec.joint and not a.is_sp.any():
        flags.append("mu_sp unidentified: no SP observations")
        frozen = set(frozen) | {"mu_sp"}
    if start is None:
        start_pv = ParameterVector.start(spec)
    elif isinstance(start, ParameterVector):
        start_pv = ParameterVector(spec.parameters, [start.get(n, ParameterVector.start(spec)[n]) for n in spec.parameters])
    else:
        base = ParameterVector.start(spec).as_dict()
        base.update({k: v for k, v in start.items() if k in base})
        start_pv = ParameterVector(spec.parameters, base.values())
    frozen = set(frozen)
    unknown = frozen - set(spec.parameters)
    if unknown:
        raise KeyError(f"cannot freeze parameters not in the model specification: {sorted(unknown)}")
    start_pv = start_pv.with_frozen(frozen)

    lik = make_likelihood(dataset, spec, draws, backend, gradient, workers)
    names = spec.parameters
    frozen_mask = np.array([n in frozen for n in names])
    opt = maximize(lik.loglik_and_grad, start_pv.to_internal(), frozen_mask, tolerances)
    theta = opt.theta
    free = ~frozen_mask
    free_names = [n for n in names if n not in frozen]

    # covariance on the internal scale, then delta method to natural scale
    Ainv = invert_information(opt.hessian)
    S = lik.person_scores(theta)[:, free]
    cov_int = robust_covariance(S, Ainv)
    jac = internal_jacobian(names, theta)[free]
    cov = cov_int * np.outer(jac, jac)
    classical = Ainv * np.outer(jac, jac)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    cse = np.sqrt(np.clip(np.diag(classical), 0.0, None))

    est = ParameterVector.from_internal(names, theta, frozen)
    robust_se = dict(zip(free_names, map(float, se)))
    robust_t = {n: (est[n] / s if s > 0 else math.copysign(math.inf, est[n]) if est[n] else 0.0)
                for n, s in robust_se.items()}
    ll0 = null_loglikelihood(dataset)
    k = int(free.sum())
    adj, aic = fit_statistics(ll0, opt.ll, k, a.n_obs)
    if not opt.converged:
        flags.append("not converged")
    meta = {
        "spec": spec.name,
        "frozen": sorted(frozen),
        "optimizer_message": opt.message,
        "n_rp": int((~a.is_sp).sum()),
        "n_sp": int(a.is_sp.sum()),
    }
    if spec.is_mixed:
        meta["draws"] = draws.metadata()
        meta["backend"] = lik.backend or kernels.BACKEND
        meta["trip_cap"] = trip_cap or spec.trip_cap
    return EstimationResult(
        estimates=est, robust_se=robust_se, robust_t=robust_t, ll0=ll0, ll_final=opt.ll,
        adj_rho2=adj, aic=aic, n_obs=a.n_obs, n_params=k, converged=opt.converged,
        iterations=opt.iterations, gradient_norm=float(np.max(np.abs(opt.grad[free]))) if k else 0.0,
        model=spec.label, n_persons=a.n_persons, classical_se=dict(zip(free_names, map(float, cse))),
        covariance=cov, flags=tuple(flags), meta=meta,
    )
