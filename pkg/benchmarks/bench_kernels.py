"""Time the panel mixed logit likelihood and gradient on the compiled and numpy backends.

Usage::

    python benchmarks/bench_kernels.py [--persons 300] [--obs 20] [--draws 500] [--repeat 5]

Both backends evaluate the same simulated M2 dataset at the true parameters;
the script reports the best wall time per evaluation and checks that both
return the same log-likelihood.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from modechoice import kernels
from modechoice.model import ModelSpec, published_parameters
from modechoice.mxl import MXLLikelihood, default_draws
from modechoice.synth import generate_population, simulate_choices


def best_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--persons", type=int, default=300)
    ap.add_argument("--obs", type=int, default=20)
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    spec = ModelSpec.load("M2")
    truth = published_parameters("M2", spec)
    ds = simulate_choices(generate_population(args.persons, seed=1), truth, spec, args.obs, seed=2)
    draws = default_draws(ds, args.draws)
    print(f"{args.persons} persons x {args.obs} obs, {args.draws} draws, workers={args.workers}")
    print(f"{'backend':<8}{'loglik (s)':>12}{'ll+grad (s)':>13}{'loglik value':>18}")

    results = {}
    for backend in kernels.available_backends():
        lik = MXLLikelihood(ds, spec, draws, backend=backend, workers=args.workers)
        theta = truth.to_internal()
        t_ll = best_time(lambda: lik.loglik(theta), args.repeat)
        t_g = best_time(lambda: lik.loglik_and_grad(theta), args.repeat)
        results[backend] = (t_ll, t_g, lik.loglik(theta))
        print(f"{backend:<8}{t_ll:>12.4f}{t_g:>13.4f}{results[backend][2]:>18.6f}")

    if len(results) == 2:
        (py_ll, py_g, py_v), (cy_ll, cy_g, cy_v) = results["python"], results["cython"]
        print(f"speed-up: loglik {py_ll / cy_ll:.1f}x, ll+grad {py_g / cy_g:.1f}x; "
              f"|delta loglik| = {abs(py_v - cy_v):.2e}")
        assert np.isclose(py_v, cy_v, rtol=0, atol=1e-8), "backends disagree"
    else:
        print("compiled backend not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
