from __future__ import annotations

import numpy as np
import pytest

from modechoice.estimation import (EstimationResult, IterationLimitError, NonFiniteObjectiveError,
                                   SingularHessianError, Tolerances, estimate, fit_statistics, invert_information,
                                   maximize, robust_covariance)
from modechoice.mnl import MNLLikelihood
from modechoice.model import ModelSpec, published_parameters
from modechoice.synth import generate_population, recovery_report, simulate_choices

M1 = ModelSpec.load("M1")


def quadratic(theta):
    return -float(np.sum((theta - 3.0) ** 2)), -2.0 * (theta - 3.0)


def test_quadratic_optimum():
    res = maximize(quadratic, np.zeros(1))
    assert res.theta[0] == pytest.approx(3.0, abs=1e-6)
    assert res.converged


def test_frozen_coordinate_does_not_move():
    res = maximize(quadratic, np.array([0.0, 1.5]), frozen_mask=[False, True])
    assert res.theta[1] == 1.5
    assert res.theta[0] == pytest.approx(3.0, abs=1e-6)


def test_nonfinite_start_reported():
    with pytest.raises(NonFiniteObjectiveError):
        maximize(lambda t: (float("nan"), np.zeros(1)), np.zeros(1))


def test_iteration_cap():
    def slow(theta):  # steep valley with a far optimum
        return -float(np.sum((theta - 50.0) ** 2 * np.array([1.0, 1e4]))), -2 * (theta - 50.0) * np.array([1.0, 1e4])
    with pytest.raises(IterationLimitError):
        maximize(slow, np.zeros(2), tolerances=Tolerances(maxiter=1, precondition=False))


@pytest.mark.parametrize("k, ll, aic", [(21, -6842.8, 13_727.6), (17, -4257.6, 8_549.2)])
def test_aic_examples(k, ll, aic):
    assert fit_statistics(-20_000.0, ll, k)[1] == pytest.approx(aic, abs=1e-9)
    assert round(fit_statistics(-20_000.0, ll, k)[1]) == round(aic)


def test_adj_rho2_zero_at_null():
    assert fit_statistics(-100.0, -100.0, 0)[0] == 0.0


def test_sandwich_cluster_size_one_is_hc():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(40, 3))
    A = np.linalg.inv(np.cov(S.T) + np.eye(3))
    hc = A @ (S.T @ S) @ A * 40 / 39
    np.testing.assert_allclose(robust_covariance(S, A), hc, atol=1e-14)


def test_zero_scores_give_zero_covariance_with_warning():
    with pytest.warns(RuntimeWarning):
        cov = robust_covariance(np.zeros((5, 2)), np.eye(2))
    assert np.all(cov == 0)


def test_singular_hessian():
    with pytest.raises(SingularHessianError):
        invert_information(np.zeros((2, 2)))


@pytest.fixture(scope="module")
def m1_fit():
    truth = published_parameters("M1", M1)
    ds = simulate_choices(generate_population(50, seed=1), truth, M1, 100, seed=2)
    return ds, truth, estimate(ds, M1)


def test_recovery_on_known_parameters(m1_fit):
    _, truth, res = m1_fit
    assert res.converged
    assert not [r.name for r in recovery_report(truth, res) if r.flagged]


def test_first_order_condition(m1_fit):
    ds, _, res = m1_fit
    g = MNLLikelihood(ds, M1).loglik_and_grad(res.estimates.to_internal())[1]
    assert np.max(np.abs(g)) < 1e-4
    assert res.ll_final >= res.ll0


def test_fit_invariants_round_trip(m1_fit, tmp_path):
    _, _, res = m1_fit
    res.save(tmp_path / "r.json")
    back = EstimationResult.load(tmp_path / "r.json")
    assert back.aic == pytest.approx(2 * back.n_params - 2 * back.ll_final, abs=1e-9)
    assert back.adj_rho2 == pytest.approx(1 - (back.ll_final - back.n_params) / back.ll0, abs=1e-9)
    assert back.estimates.as_dict() == res.estimates.as_dict()
    assert back.robust_se == res.robust_se


def test_freezing_at_optimum_keeps_other_estimates(m1_fit):
    ds, _, res = m1_fit
    again = estimate(ds, M1, start=res.estimates, frozen=["b_cost", "b_mig"])
    for n in M1.parameters:
        assert again.estimates[n] == pytest.approx(res.estimates[n], abs=1e-6)
    assert again.n_params == M1.n_parameters - 2


def test_robust_close_to_classical_under_correct_specification():
    truth = published_parameters("M1", M1)
    ds = simulate_choices(generate_population(4000, seed=5), truth, M1, 1, seed=6)
    res = estimate(ds, M1)
    ratios = np.array([res.robust_se[n] / res.classical_se[n] for n in res.free_names])
    assert np.all(np.abs(ratios - 1) < 0.15), dict(zip(res.free_names, ratios.round(3)))


def test_estimation_deterministic():
    truth = published_parameters("M1", M1)
    ds = simulate_choices(generate_population(20, seed=3), truth, M1, 30, seed=4)
    a, b = estimate(ds, M1), estimate(ds, M1)
    assert np.array_equal(a.estimates.values, b.estimates.values)
