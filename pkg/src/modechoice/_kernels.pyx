# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled panel simulated log-likelihood kernel.

Same contract as ``modechoice._kernels_py.panel_loglik``.
"""

from libc.math cimport exp, log, INFINITY
from libc.stdlib cimport malloc, free

cdef enum:
    MAXJ = 16


def panel_loglik(
    const double[:, ::1] F,
    const double[:, ::1] T,
    const double[:, ::1] C,
    const unsigned char[:, ::1] avail,
    const long long[::1] chosen,
    const double[::1] scale,
    const unsigned char[::1] is_sp,
    const long long[::1] offsets,
    const double[:, ::1] bT,
    const double[:, ::1] bC,
    const double[:, ::1] zT,
    const double[:, ::1] zC,
    bint want_grad,
    double[::1] ll_out,
    double[:, ::1] g_out,
    double[:, ::1] pbar_out,
):
    cdef Py_ssize_t G = offsets.shape[0] - 1
    cdef Py_ssize_t R = bT.shape[1]
    cdef Py_ssize_t J = F.shape[1]
    cdef Py_ssize_t n, r, t, j, ch, lo, tn, maxt = 0, base
    cdef double s, bt, bc, vmax, den, lpn, mx, wsum, w, tbar, cbar, vbar
    cdef double v[MAXJ]
    cdef double e[MAXJ]
    cdef int bad = -1
    if J > MAXJ:
        raise ValueError("too many alternatives for compiled kernel")
    cdef double* llr = <double*> malloc(R * sizeof(double))
    cdef double* ar = <double*> malloc(R * sizeof(double))
    cdef double* cr = <double*> malloc(R * sizeof(double))
    cdef double* mr = <double*> malloc(R * sizeof(double))
    cdef double* wr = <double*> malloc(R * sizeof(double))
    cdef double* pr = NULL  # per-draw probabilities of the current person
    for n in range(G):
        if offsets[n + 1] - offsets[n] > maxt:
            maxt = offsets[n + 1] - offsets[n]
    if want_grad:
        pr = <double*> malloc((R * maxt * J + 1) * sizeof(double))
    if llr == NULL or ar == NULL or cr == NULL or mr == NULL or wr == NULL or (want_grad and pr == NULL):
        free(llr); free(ar); free(cr); free(mr); free(wr); free(pr)
        raise MemoryError()
    try:
        with nogil:
            for n in range(G):
                lo = offsets[n]
                tn = offsets[n + 1] - lo
                for r in range(R):
                    bt = bT[n, r]
                    bc = bC[n, r]
                    llr[r] = 0.0
                    ar[r] = 0.0
                    cr[r] = 0.0
                    mr[r] = 0.0
                    for t in range(offsets[n], offsets[n + 1]):
                        s = scale[t]
                        ch = chosen[t]
                        vmax = -INFINITY
                        for j in range(J):
                            if avail[t, j]:
                                v[j] = s * (F[t, j] + bt * T[t, j] + bc * C[t, j])
                                if v[j] > vmax:
                                    vmax = v[j]
                        den = 0.0
                        for j in range(J):
                            if avail[t, j]:
                                e[j] = exp(v[j] - vmax)
                                den += e[j]
                            else:
                                e[j] = 0.0
                        llr[r] += v[ch] - vmax - log(den)
                        if want_grad:
                            tbar = 0.0
                            cbar = 0.0
                            vbar = 0.0
                            base = (r * tn + (t - lo)) * J
                            for j in range(J):
                                w = e[j] / den
                                pr[base + j] = w
                                if avail[t, j]:
                                    tbar += w * T[t, j]
                                    cbar += w * C[t, j]
                                    vbar += w * v[j]
                            ar[r] += s * (T[t, ch] - tbar)
                            cr[r] += s * (C[t, ch] - cbar)
                            if is_sp[t]:
                                mr[r] += v[ch] - vbar
                mx = -INFINITY
                for r in range(R):
                    if llr[r] > mx:
                        mx = llr[r]
                if mx == -INFINITY:
                    bad = n
                    break
                wsum = 0.0
                for r in range(R):
                    wr[r] = exp(llr[r] - mx)
                    wsum += wr[r]
                ll_out[n] = mx + log(wsum / R)
                if not want_grad:
                    continue
                for r in range(R):
                    wr[r] = wr[r] / wsum
                g_out[n, 0] = 0.0
                g_out[n, 1] = 0.0
                g_out[n, 2] = 0.0
                g_out[n, 3] = 0.0
                g_out[n, 4] = 0.0
                for r in range(R):
                    w = wr[r]
                    g_out[n, 0] += w * ar[r]
                    g_out[n, 1] += w * ar[r] * zT[n, r]
                    g_out[n, 2] += w * cr[r] * bC[n, r]
                    g_out[n, 3] += w * cr[r] * bC[n, r] * zC[n, r]
                    g_out[n, 4] += w * mr[r]
                for t in range(offsets[n], offsets[n + 1]):
                    for j in range(J):
                        pbar_out[t, j] = 0.0
                for r in range(R):
                    w = wr[r]
                    for t in range(tn):
                        base = (r * tn + t) * J
                        for j in range(J):
                            pbar_out[lo + t, j] += w * pr[base + j]
    finally:
        free(llr); free(ar); free(cr); free(mr); free(wr); free(pr)
    return bad
