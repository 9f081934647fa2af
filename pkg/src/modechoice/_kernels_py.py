"""Pure numpy panel simulated log-likelihood kernel.

Reference implementation and fallback for the compiled ``_kernels`` module.

For each person n, draw r and choice occasion t the utility of alternative j is
``scale_t * (F[t, j] + bT[n, r] * T[t, j] + bC[n, r] * C[t, j])``.

Outputs (written in place):

``ll_out[n]``
    log of the simulated panel probability, averaged over draws in the log
    domain with a max shift.
``g_out[n]``
    draw-weighted sums used to assemble the score, with posterior weights
    ``w_r`` proportional to the panel likelihood at draw r:
    ``[sum w a, sum w a zT, sum w c bC, sum w c bC zC, sum w m]`` where
    ``a``/``c`` are the per-draw derivatives of the panel log-likelihood with
    respect to the time/cost coefficients and ``m`` the derivative with respect
    to log SP scale.
``pbar_out[t, j]``
    posterior-weighted choice probabilities.

Returns the index of the first person whose simulated probability is zero,
or -1.
"""

from __future__ import annotations

import numpy as np


def panel_loglik(F, T, C, avail, chosen, scale, is_sp, offsets, bT, bC, zT, zC,
                 want_grad, ll_out, g_out, pbar_out) -> int:
    G = len(offsets) - 1
    R = bT.shape[1]
    for n in range(G):
        lo, hi = offsets[n], offsets[n + 1]
        s = scale[lo:hi][None, :, None]
        av = avail[lo:hi].astype(bool)[None]
        ch = chosen[lo:hi]
        rows = np.arange(hi - lo)
        v = s * (F[lo:hi][None] + bT[n][:, None, None] * T[lo:hi][None] + bC[n][:, None, None] * C[lo:hi][None])
        v = np.where(av, v, -np.inf)
        vmax = v.max(axis=2, keepdims=True)
        e = np.exp(v - vmax)
        den = e.sum(axis=2, keepdims=True)
        logp = (v - vmax - np.log(den))[:, rows, ch]  # (R, Tn)
        llr = logp.sum(axis=1)
        mx = llr.max() if R else -np.inf
        if not np.isfinite(mx):
            return n
        w = np.exp(llr - mx)
        wsum = w.sum()
        ll_out[n] = mx + np.log(wsum / R)
        if not want_grad:
            continue
        w = w / wsum
        P = e / den  # (R, Tn, J)
        Tn, Cn = T[lo:hi][None], C[lo:hi][None]
        sc = scale[lo:hi][None]
        a = (sc * (T[lo:hi][rows, ch][None] - (P * Tn).sum(axis=2))).sum(axis=1)
        c = (sc * (C[lo:hi][rows, ch][None] - (P * Cn).sum(axis=2))).sum(axis=1)
        vz = np.where(av, v, 0.0)
        m = ((vz[:, rows, ch] - (P * vz).sum(axis=2)) * is_sp[lo:hi][None].astype(bool)).sum(axis=1)
        g_out[n, 0] = np.dot(w, a)
        g_out[n, 1] = np.dot(w, a * zT[n])
        g_out[n, 2] = np.dot(w, c * bC[n])
        g_out[n, 3] = np.dot(w, c * bC[n] * zC[n])
        g_out[n, 4] = np.dot(w, m)
        pbar_out[lo:hi] = np.einsum("r,rtj->tj", w, P)
    return -1
