# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backup kernel.

Same arithmetic, in the same order, as ``_pykernel``. Columns (N, beta_I) are
independent, so they are distributed over OpenMP threads; each state's backup is
a serial computation and the result does not depend on the thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log, log1p, floor

cnp.import_array()

cdef double ZERO_SNAP = 1e-13
cdef double TAIL_MASS = 1e-12
cdef double BOUND_SLACK = 1e-9

cdef int FLAG_BOUNDARY = 1
cdef int FLAG_CLIPPED = 2


cdef struct Params:
    long k_lo
    long n_lo
    long b_lo
    long b_hi
    long k_max
    long n_max
    long k_ext
    long n_cap
    long nd
    double alpha0
    double beta0
    double eta
    double gamma
    int use_future
    int has_ext


cdef inline void backup_state(
    long K, long N, long b, Params* p,
    const long[::1] kthr, const long[::1] deltas, const double[::1] probs,
    const double[:, :, ::1] next_tab, const double[:, :, ::1] ext_tab,
    double* u_out, int* n_out, signed char* f_out, long* nb_out,
) noexcept nogil:
    cdef double alpha, beta, lq, lr, best, na, lp, cum, pterm, pk, fut, s, v, val
    cdef long raw, n_bound, n, Np, kt, k, Kp, bp, blo, j
    cdef int flags = 0
    cdef int best_n = 0
    cdef int boundary, best_boundary = 0, allzero

    u_out[0] = 0.0
    n_out[0] = 0
    f_out[0] = 0
    nb_out[0] = 0
    if K <= kthr[N - p.n_lo]:
        return
    alpha = K + p.alpha0
    beta = N + p.beta0 + b
    if beta <= 0.0:
        return

    raw = <long>floor(p.eta * beta / ((1.0 - p.eta) * alpha) + BOUND_SLACK)
    n_bound = raw
    if raw > p.n_cap:
        n_bound = p.n_cap
        flags = flags | FLAG_CLIPPED

    lq = -log1p(beta)
    lr = log(beta) + lq
    best = 0.0
    for n in range(1, n_bound + 1):
        na = n * alpha
        Np = N + n
        kt = kthr[Np - p.n_lo] - K
        lp = na * lr
        cum = 0.0
        pterm = 0.0
        k = 0
        while k <= kt:
            pk = exp(lp)
            pterm = pterm + pk
            cum = cum + pk
            lp = lp + (log((k + na) / (k + 1.0)) + lq)
            k = k + 1
        fut = 0.0
        boundary = 0
        if p.use_future:
            blo = <long>floor(-(Np + p.beta0)) + 1
            if blo < p.b_lo:
                blo = p.b_lo
            while True:
                pk = exp(lp)
                Kp = K + k
                s = 0.0
                allzero = 1
                for j in range(p.nd):
                    bp = b + n * deltas[j]
                    if bp > p.b_hi:
                        bp = p.b_hi
                    if bp < blo:
                        bp = blo
                    if Kp <= p.k_max and Np <= p.n_max:
                        v = next_tab[Kp - p.k_lo, Np - p.n_lo, bp - p.b_lo]
                    elif p.has_ext and Kp <= p.k_ext:
                        v = ext_tab[Kp - p.k_lo, Np - p.n_lo, bp - p.b_lo]
                        if v != 0.0:
                            boundary = 1
                    else:
                        v = 0.0
                    if v != 0.0:
                        allzero = 0
                        s = s + probs[j] * v
                fut = fut + pk * s
                cum = cum + pk
                if allzero or 1.0 - cum < TAIL_MASS:
                    break
                lp = lp + (log((k + na) / (k + 1.0)) + lq)
                k = k + 1
        val = p.eta * pterm - (1.0 - p.eta) * na / beta + p.gamma * fut
        if val > best:
            best = val
            best_n = n
            best_boundary = boundary
    if best < ZERO_SNAP:
        best = 0.0
        best_n = 0
        best_boundary = 0
    if best_boundary:
        flags = flags | FLAG_BOUNDARY
    u_out[0] = best
    n_out[0] = best_n
    f_out[0] = <signed char>flags
    nb_out[0] = n_bound


def backup_grid(p, k_range, n_range, next_tab=None, ext_tab=None, bint stop_at_zero=False, int workers=1):
    """Compiled counterpart of ``_pykernel.backup_grid``."""
    cdef long k0 = k_range[0], k1 = k_range[1], n0 = n_range[0], n1 = n_range[1]
    cdef Params prm
    prm.k_lo = p["k_lo"]
    prm.n_lo = p["n_lo"]
    prm.b_lo = p["b_lo"]
    prm.b_hi = p["b_hi"]
    prm.k_max = p["k_max"]
    prm.n_max = p["n_max"]
    prm.k_ext = p["k_ext"]
    prm.n_cap = p["n_cap"]
    prm.alpha0 = p["alpha0"]
    prm.beta0 = p["beta0"]
    prm.eta = p["eta"]
    prm.gamma = p["gamma"]
    prm.use_future = 1 if (prm.gamma > 0.0 and next_tab is not None) else 0
    prm.has_ext = 1 if ext_tab is not None else 0

    cdef const long[::1] kthr = np.ascontiguousarray(p["kthr"], dtype=np.int64)
    cdef const long[::1] deltas = np.ascontiguousarray(p["deltas"], dtype=np.int64)
    cdef const double[::1] probs = np.ascontiguousarray(p["probs"], dtype=np.float64)
    prm.nd = deltas.shape[0]
    dummy = np.zeros((1, 1, 1))
    cdef const double[:, :, ::1] nxt = np.ascontiguousarray(next_tab if next_tab is not None else dummy, dtype=np.float64)
    cdef const double[:, :, ::1] ext = np.ascontiguousarray(ext_tab if ext_tab is not None else dummy, dtype=np.float64)

    cdef long nk = k1 - k0 + 1, nn = n1 - n0 + 1, nbb = prm.b_hi - prm.b_lo + 1
    U_arr = np.zeros((nk, nn, nbb))
    pol_arr = np.zeros((nk, nn, nbb), dtype=np.int32)
    flg_arr = np.zeros((nk, nn, nbb), dtype=np.int8)
    closed_arr = np.zeros((nn, nbb), dtype=np.int8)
    cnt_arr = np.zeros(nn * nbb, dtype=np.int64)
    cdef double[:, :, ::1] U = U_arr
    cdef int[:, :, ::1] pol = pol_arr
    cdef signed char[:, :, ::1] flg = flg_arr
    cdef signed char[:, ::1] closed = closed_arr
    cdef long[::1] cnt = cnt_arr

    cdef long col, jn, jb, ik, K, N, b, nb
    cdef double u
    cdef int n_star
    cdef signed char f
    cdef int stop = stop_at_zero
    cdef long ncol = nn * nbb
    for col in prange(ncol, nogil=True, schedule="dynamic", num_threads=max(1, workers)):
        jn = col // nbb
        jb = col % nbb
        N = n0 + jn
        b = prm.b_lo + jb
        for ik in range(nk):
            K = k0 + ik
            # plain assignments make these thread-private inside prange
            u = 0.0
            n_star = 0
            f = 0
            nb = 0
            backup_state(K, N, b, &prm, kthr, deltas, probs, nxt, ext, &u, &n_star, &f, &nb)
            U[ik, jn, jb] = u
            pol[ik, jn, jb] = n_star
            flg[ik, jn, jb] = f
            cnt[col] += nb
            if stop and u == 0.0 and K > kthr[N - prm.n_lo]:
                closed[jn, jb] = 1
                break
    return U_arr, pol_arr, flg_arr, closed_arr, int(cnt_arr.sum())
