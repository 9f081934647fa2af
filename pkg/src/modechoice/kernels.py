"""Kernel backend selection.

The compiled Cython kernel is used when it was built; otherwise the numpy
implementation is used. Set ``MODECHOICE_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

BACKEND = "python"
_compiled = None
if os.environ.get("MODECHOICE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _compiled = None


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def panel_loglik(F, T, C, avail, chosen, scale, is_sp, offsets, bT, bC, zT, zC,
                 want_grad=True, backend: str | None = None, workers: int = 1):
    """Run the panel kernel; returns (ll per person, g per person, pbar, bad index).

    With ``workers > 1`` and the compiled backend, persons are split into
    contiguous chunks evaluated on threads (the kernel releases the GIL).
    Results are written per person, so they do not depend on ``workers``.
    """
    backend = backend or BACKEND
    G = len(offsets) - 1
    ll = np.zeros(G)
    g = np.zeros((G, 5))
    pbar = np.zeros(F.shape)
    args = (
        np.ascontiguousarray(F, dtype=np.float64),
        np.ascontiguousarray(T, dtype=np.float64),
        np.ascontiguousarray(C, dtype=np.float64),
        np.ascontiguousarray(avail, dtype=np.uint8),
        np.ascontiguousarray(chosen, dtype=np.int64),
        np.ascontiguousarray(scale, dtype=np.float64),
        np.ascontiguousarray(is_sp, dtype=np.uint8),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(bT, dtype=np.float64),
        np.ascontiguousarray(bC, dtype=np.float64),
        np.ascontiguousarray(zT, dtype=np.float64),
        np.ascontiguousarray(zC, dtype=np.float64),
    )
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel not built")
        if workers > 1 and G > 1:
            bad = _threaded(args, bool(want_grad), ll, g, pbar, workers)
        else:
            bad = _compiled.panel_loglik(*args, bool(want_grad), ll, g, pbar)
    elif backend == "python":
        bad = _kernels_py.panel_loglik(*args, bool(want_grad), ll, g, pbar)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return ll, g, pbar, int(bad)


def _threaded(args, want_grad, ll, g, pbar, workers):
    F, T, C, avail, chosen, scale, is_sp, offsets, bT, bC, zT, zC = args
    G = len(offsets) - 1
    bounds = np.linspace(0, G, min(workers, G) + 1).astype(int)

    def run(k):
        lo, hi = bounds[k], bounds[k + 1]
        a, b = offsets[lo], offsets[hi]
        bad = _compiled.panel_loglik(
            F[a:b], T[a:b], C[a:b], avail[a:b], chosen[a:b], scale[a:b], is_sp[a:b],
            np.ascontiguousarray(offsets[lo:hi + 1] - a), bT[lo:hi], bC[lo:hi], zT[lo:hi], zC[lo:hi],
            want_grad, ll[lo:hi], g[lo:hi], pbar[a:b],
        )
        return bad if bad < 0 else bad + lo

    with ThreadPoolExecutor(max_workers=len(bounds) - 1) as ex:
        results = list(ex.map(run, range(len(bounds) - 1)))
    failed = [r for r in results if r >= 0]
    return min(failed) if failed else -1
