"""Immediate-reward and finite-horizon policies by backward induction."""

import logging
import math
import os
import time

import numpy as np

from .belief import nb_pmf
from .kernel import get_backend
from .model import ProblemSpec, State, action_upper_bound, expected_penalty

log = logging.getLogger(__name__)

DEFAULT_MEM_BUDGET = 10**8
FLAG_BOUNDARY = 1
FLAG_CLIPPED = 2


class MemoryBudgetError(RuntimeError):
    """The tables needed for a solve exceed the configured entry budget."""


def mem_budget(override=None):
    if override is not None:
        return int(override)
    env = os.environ.get("TESTSCHED_MEM_BUDGET")
    return int(float(env)) if env else DEFAULT_MEM_BUDGET


class _Table:
    """Per-time-step dense array indexed by (t, K, N, beta_I)."""

    def __init__(self, spec: ProblemSpec, values: np.ndarray):
        self.spec = spec
        self.values = values

    @property
    def horizon(self):
        return self.values.shape[0]

    def index(self, K, N, beta_i=0):
        s = self.spec
        ik, jn, jb = K - s.k_lo, N - s.n_lo, beta_i - s.b_lo
        shape = self.values.shape[1:]
        if not (0 <= ik < shape[0] and 0 <= jn < shape[1] and 0 <= jb < shape[2]):
            raise KeyError(f"state <{K}, {N}, {beta_i}> is outside the table")
        return ik, jn, jb

    def in_grid(self, K, N, beta_i=0):
        try:
            self.index(K, N, beta_i)
        except KeyError:
            return False
        return True

    def at(self, K, N, beta_i=0, t=1):
        return self.values[(t - 1,) + self.index(K, N, beta_i)].item()

    def slice(self, t=1, beta_i=0):
        """2-D (K, N) view at time ``t`` and innovation level ``beta_i``."""
        return self.values[t - 1, :, :, beta_i - self.spec.b_lo]

    def states(self):
        """Valid (K, N, beta_I) triples in row-major order."""
        s = self.spec
        for K in range(s.k_lo, s.k_max + 1):
            for N in range(s.n_lo, s.n_max + 1):
                for b in range(s.b_lo, s.b_hi + 1):
                    if N + s.beta0 + b > 0:
                        yield K, N, b


class UtilityTable(_Table):
    pass


class PolicyTable(_Table):
    def __init__(self, spec, values, flags=None):
        super().__init__(spec, values)
        self.flags = flags


def kernel_params(spec: ProblemSpec, k_ext=None):
    d = spec.innovation
    return {
        "k_lo": spec.k_lo,
        "n_lo": spec.n_lo,
        "b_lo": spec.b_lo,
        "b_hi": spec.b_hi,
        "k_max": spec.k_max,
        "n_max": spec.n_max,
        "k_ext": spec.k_max if k_ext is None else k_ext,
        "n_cap": spec.n_cap,
        "alpha0": float(spec.alpha0),
        "beta0": float(spec.beta0),
        "eta": float(spec.eta),
        "gamma": float(spec.gamma),
        "kthr": np.asarray(spec.terminal_thresholds, dtype=np.int64),
        "deltas": np.array([v for v, q in zip(d.support, d.probs) if q > 0], dtype=np.int64),
        "probs": np.array([q for q in d.probs if q > 0], dtype=np.float64),
    }


def expected_terminal_prob(s: State, n: int, spec: ProblemSpec) -> float:
    """Probability that ``n`` more tests from ``s`` end in a terminal record."""
    alpha, beta = spec.rate_params(s)
    k_top = spec.terminal_thresholds[s.N + n - spec.n_lo] - s.K
    return math.fsum(nb_pmf(k, n, alpha, beta) for k in range(k_top + 1))


def immediate_value(s: State, n: int, spec: ProblemSpec) -> float:
    if n == 0:
        return 0.0
    return spec.eta * expected_terminal_prob(s, n, spec) - expected_penalty(s, n, spec)


def immediate_action(s: State, spec: ProblemSpec):
    """(n*, U*) of the one-step problem at ``s``; works for any valid state."""
    if spec.is_terminal(s.K, s.N):
        return 0, 0.0
    best_n, best = 0, 0.0
    for n in range(1, action_upper_bound(s, spec) + 1):
        v = immediate_value(s, n, spec)
        if v > best:
            best_n, best = n, v
    if best < 1e-13:
        return 0, 0.0
    return best_n, best


class Solution:
    """Result of :func:`solve_problem`: tables plus the boundary data and statistics."""

    def __init__(self, spec, utility, policy, ext_utility, ext_policy, k_ext, stats):
        self.spec = spec
        self.utility = utility
        self.policy = policy
        self.ext_utility = ext_utility
        self.ext_policy = ext_policy
        self.k_ext = k_ext
        self.stats = stats


def _check_budget(entries, budget, what):
    if entries > budget:
        raise MemoryBudgetError(f"{what} needs {entries} table entries, budget is {budget}")


def boundary_table(spec: ProblemSpec, backend=None, workers=1, budget=None):
    """Immediate utilities and actions on the extended margin.

    Covers N up to ``n_max + n_cap`` and, per (N, beta_I) column, K up to the
    first non-terminal state with zero utility; everything above is zero.
    """
    budget = mem_budget(budget)
    _, kern = get_backend(backend)
    nb = spec.b_hi - spec.b_lo + 1
    nn = spec.n_ext - spec.n_lo + 1
    k_ext = max(spec.k_max, int(spec.terminal_thresholds[spec.n_ext - spec.n_lo])) + 8
    backups = 0
    while True:
        _check_budget((k_ext - spec.k_lo + 1) * nn * nb, budget, "extended margin")
        p = kernel_params(spec, k_ext)
        p["gamma"] = 0.0
        U, pol, _, closed, n_b = kern.backup_grid(
            p, (spec.k_lo, k_ext), (spec.n_lo, spec.n_ext), stop_at_zero=True, workers=workers
        )
        backups += n_b
        if closed.all():
            return U, pol, k_ext, backups
        k_ext = spec.k_lo + 2 * (k_ext - spec.k_lo + 1)


def solve_problem(spec: ProblemSpec, workers=None, backend=None, budget=None, horizon=None) -> Solution:
    """Backward induction from t = T down to t = 1."""
    workers = workers or os.cpu_count() or 1
    budget = mem_budget(budget)
    name, kern = get_backend(backend)
    T = spec.horizon if horizon is None else horizon
    shape = spec.table_shape()
    _check_budget(T * int(np.prod(shape)), budget, "policy and utility tables")

    start = time.perf_counter()
    U = np.zeros((T,) + shape)
    P = np.zeros((T,) + shape, dtype=np.int32)
    F = np.zeros((T,) + shape, dtype=np.int8)
    backups = 0

    ext_U = ext_P = None
    k_ext = spec.k_max
    if T > 1 and spec.gamma > 0:
        ext_U, ext_P, k_ext, n_b = boundary_table(spec, backend=name, workers=workers, budget=budget - U.size)
        backups += n_b

    p = kernel_params(spec, k_ext)
    k_rng, n_rng = (spec.k_lo, spec.k_max), (spec.n_lo, spec.n_max)
    for t in range(T, 0, -1):
        nxt = U[t] if t < T else None
        U[t - 1], P[t - 1], F[t - 1], _, n_b = kern.backup_grid(
            p, k_rng, n_rng, next_tab=nxt, ext_tab=ext_U, workers=workers
        )
        backups += n_b

    n_valid = sum(1 for _ in UtilityTable(spec, U).states())
    stats = {
        "backend": name,
        "states": n_valid * T,
        "backups": backups,
        "boundary_influenced": int(np.count_nonzero(F & FLAG_BOUNDARY)),
        "clipped_bound": int(np.count_nonzero(F & FLAG_CLIPPED)),
        "k_ext": k_ext,
        "wall_time": time.perf_counter() - start,
    }
    if stats["clipped_bound"]:
        log.warning("action bound clipped to n_cap=%d in %d state backups", spec.n_cap, stats["clipped_bound"])
    return Solution(spec, UtilityTable(spec, U), PolicyTable(spec, P, F), ext_U, ext_P, k_ext, stats)


def solve(spec: ProblemSpec, **kwargs):
    """Optimal utilities and policies for every time step."""
    sol = solve_problem(spec, **kwargs)
    return sol.utility, sol.policy


def immediate_tables(spec: ProblemSpec, **kwargs):
    sol = solve_problem(spec, horizon=1, **kwargs)
    return sol.utility, sol.policy


def immediate_policy(spec: ProblemSpec, **kwargs) -> PolicyTable:
    """Single-step policy maximizing expected immediate reward."""
    return immediate_tables(spec, **kwargs)[1]


def testing_region(pt: PolicyTable, t=1, beta_i=0):
    """Non-terminal states whose optimal action at time ``t`` is to test.

    ``beta_i=None`` collects all innovation levels.
    """
    s = pt.spec
    levels = range(s.b_lo, s.b_hi + 1) if beta_i is None else [beta_i]
    out = set()
    for b in levels:
        sl = pt.slice(t, b)
        for ik, jn in zip(*np.nonzero(sl)):
            out.add(State(int(ik) + s.k_lo, int(jn) + s.n_lo, b))
    return out
