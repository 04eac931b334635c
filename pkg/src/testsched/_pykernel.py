"""Pure-Python backup kernel, used when the compiled extension is unavailable.

Mirrors ``_ckernel.pyx`` operation for operation so both backends produce the
same doubles; it is only practical for small grids.
"""

import math

import numpy as np

ZERO_SNAP = 1e-13
TAIL_MASS = 1e-12
BOUND_SLACK = 1e-9

FLAG_BOUNDARY = 1
FLAG_CLIPPED = 2


def _backup_state(K, N, b, p, next_tab, ext_tab):
    """Bellman backup for one state; returns (utility, n_star, flags, n_evaluated)."""
    kthr = p["kthr"]
    n_lo = p["n_lo"]
    k_lo = p["k_lo"]
    b_lo = p["b_lo"]
    b_hi = p["b_hi"]
    eta = p["eta"]
    gamma = p["gamma"]
    deltas = p["deltas"]
    probs = p["probs"]
    nd = len(deltas)

    if K <= kthr[N - n_lo]:
        return 0.0, 0, 0, 0
    alpha = K + p["alpha0"]
    beta = N + p["beta0"] + b
    if beta <= 0.0:
        return 0.0, 0, 0, 0

    flags = 0
    raw = math.floor(eta * beta / ((1.0 - eta) * alpha) + BOUND_SLACK)
    n_bound = raw
    if raw > p["n_cap"]:
        n_bound = p["n_cap"]
        flags |= FLAG_CLIPPED

    use_future = gamma > 0.0 and next_tab is not None
    k_max = p["k_max"]
    n_max = p["n_max"]
    k_ext = p["k_ext"]
    lq = -math.log1p(beta)
    lr = math.log(beta) + lq

    best = 0.0
    best_n = 0
    best_boundary = False
    for n in range(1, n_bound + 1):
        na = n * alpha
        Np = N + n
        kt = kthr[Np - n_lo] - K
        lp = na * lr
        cum = 0.0
        pterm = 0.0
        k = 0
        while k <= kt:
            pk = math.exp(lp)
            pterm += pk
            cum += pk
            lp += math.log((k + na) / (k + 1.0)) + lq
            k += 1
        fut = 0.0
        boundary = False
        if use_future:
            blo = max(b_lo, math.floor(-(Np + p["beta0"])) + 1)
            while True:
                pk = math.exp(lp)
                Kp = K + k
                s = 0.0
                allzero = True
                for j in range(nd):
                    bp = b + n * deltas[j]
                    if bp > b_hi:
                        bp = b_hi
                    if bp < blo:
                        bp = blo
                    if Kp <= k_max and Np <= n_max:
                        v = next_tab[Kp - k_lo, Np - n_lo, bp - b_lo]
                    elif Kp <= k_ext:
                        v = ext_tab[Kp - k_lo, Np - n_lo, bp - b_lo]
                        if v != 0.0:
                            boundary = True
                    else:
                        v = 0.0
                    if v != 0.0:
                        allzero = False
                        s += probs[j] * v
                fut += pk * s
                cum += pk
                if allzero or 1.0 - cum < TAIL_MASS:
                    break
                lp += math.log((k + na) / (k + 1.0)) + lq
                k += 1
        val = eta * pterm - (1.0 - eta) * na / beta + gamma * fut
        if val > best:
            best = val
            best_n = n
            best_boundary = boundary
    if best < ZERO_SNAP:
        best = 0.0
        best_n = 0
        best_boundary = False
    if best_boundary:
        flags |= FLAG_BOUNDARY
    return best, best_n, flags, n_bound


def backup_grid(p, k_range, n_range, next_tab=None, ext_tab=None, stop_at_zero=False, workers=1):
    """Back up every state of the box ``k_range x n_range x [b_lo, b_hi]``.

    With ``stop_at_zero`` each (N, beta_I) column is scanned upward in K and the
    rest of the column is zero-filled once a non-terminal state has zero utility.
    Returns ``(U, policy, flags, closed, backups)``; ``closed[N, b]`` records
    whether the column reached such a state inside the box.
    """
    k0, k1 = k_range
    n0, n1 = n_range
    b_lo, b_hi = p["b_lo"], p["b_hi"]
    shape = (k1 - k0 + 1, n1 - n0 + 1, b_hi - b_lo + 1)
    U = np.zeros(shape)
    pol = np.zeros(shape, dtype=np.int32)
    flg = np.zeros(shape, dtype=np.int8)
    closed = np.zeros(shape[1:], dtype=np.int8)
    backups = 0
    kthr = p["kthr"]
    for jn, N in enumerate(range(n0, n1 + 1)):
        for jb, b in enumerate(range(b_lo, b_hi + 1)):
            for ik, K in enumerate(range(k0, k1 + 1)):
                u, n_star, f, nb = _backup_state(K, N, b, p, next_tab, ext_tab)
                U[ik, jn, jb] = u
                pol[ik, jn, jb] = n_star
                flg[ik, jn, jb] = f
                backups += nb
                if stop_at_zero and u == 0.0 and K > kthr[N - p["n_lo"]]:
                    closed[jn, jb] = 1
                    break
    return U, pol, flg, closed, backups
