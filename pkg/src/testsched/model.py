"""The test-scheduling MDP over cumulative records <K, N, beta_I>."""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .belief import (
    GammaBelief,
    PriorSpec,
    SafetyRequirement,
    is_terminal,
    nb_logpmf,
    prior_from_moments,
    terminal_threshold,
)

TAIL_MASS = 1e-12
# Guards floor() in the action bound against eta/(1-eta) landing a ulp low.
_BOUND_SLACK = 1e-9


class ConfigError(ValueError):
    """Invalid problem configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class InnovationDist:
    """Categorical distribution over per-test innovation increments."""

    support: Tuple[int, ...] = (0,)
    probs: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        support = tuple(int(v) for v in self.support)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        if len(support) == 0:
            object.__setattr__(self, "support", (0,))
            object.__setattr__(self, "probs", (1.0,))
            return
        if len(support) != len(probs):
            raise ConfigError("innovation.probs", "must have the same length as innovation.values")
        if len(set(support)) != len(support):
            raise ConfigError("innovation.values", "entries must be distinct")
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ConfigError("innovation.probs", f"must be non-negative and sum to 1, got {list(probs)}")

    @property
    def is_trivial(self):
        return all(v == 0 for v, p in zip(self.support, self.probs) if p > 0)


NO_INNOVATION = InnovationDist()


@dataclass(frozen=True)
class DTest:
    value: float = 1.0
    unit: str = "test"


@dataclass(frozen=True)
class State:
    K: int
    N: int
    beta_I: int = 0


@dataclass(frozen=True)
class ProblemSpec:
    requirement: SafetyRequirement
    eta: float
    gamma: float = 1.0
    horizon: int = 5
    prior: Optional[PriorSpec] = None
    innovation: InnovationDist = NO_INNOVATION
    k_max: int = 50
    n_max: int = 50
    beta_i_min: int = -10
    beta_i_max: int = 20
    n_cap: int = 200
    d_test: DTest = field(default_factory=DTest)

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ConfigError("eta", f"must lie in (0, 1), got {self.eta}")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma", f"must lie in [0, 1], got {self.gamma}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("horizon", f"must be a positive integer, got {self.horizon}")
        if self.k_max < 1:
            raise ConfigError("grid.k_max", f"must be >= 1, got {self.k_max}")
        if self.n_max < 1:
            raise ConfigError("grid.n_max", f"must be >= 1, got {self.n_max}")
        if self.beta_i_min > 0:
            raise ConfigError("beta_i.min", f"must be <= 0, got {self.beta_i_min}")
        if self.beta_i_max < 0:
            raise ConfigError("beta_i.max", f"must be >= 0, got {self.beta_i_max}")
        if self.n_cap < 1:
            raise ConfigError("n_cap", f"must be >= 1, got {self.n_cap}")
        if not self.d_test.value > 0:
            raise ConfigError("d_test.value", "must be positive")

    # -- derived quantities -------------------------------------------------

    @cached_property
    def prior_belief(self) -> Optional[GammaBelief]:
        return prior_from_moments(self.prior) if self.prior is not None else None

    @property
    def alpha0(self):
        return self.prior_belief.alpha if self.prior is not None else 0.0

    @property
    def beta0(self):
        return self.prior_belief.beta if self.prior is not None else 0.0

    @property
    def k_lo(self):
        """Smallest K in the table; K = 0 needs a prior to be a valid belief."""
        return 0 if self.prior is not None else 1

    @property
    def n_lo(self):
        return 0 if self.prior is not None else 1

    @property
    def b_lo(self):
        """Lowest innovation level the table stores (0 unless increments can be negative)."""
        return self.beta_i_min if min(self.innovation.support) < 0 else 0

    @property
    def b_hi(self):
        return self.beta_i_max if max(self.innovation.support) > 0 else 0

    @property
    def n_ext(self):
        """Largest N any successor of an in-grid state can reach."""
        return self.n_max + self.n_cap

    @property
    def n_thr(self):
        """Largest N whose terminal threshold the solver may query."""
        return self.n_ext + self.n_cap

    def table_shape(self):
        return (
            self.k_max - self.k_lo + 1,
            self.n_max - self.n_lo + 1,
            self.b_hi - self.b_lo + 1,
        )

    @cached_property
    def terminal_thresholds(self) -> np.ndarray:
        """``kthr[N - n_lo]``: largest terminal K at N, for N up to ``n_thr``."""
        out = np.empty(self.n_thr - self.n_lo + 1, dtype=np.int64)
        K = self.k_lo - 1
        for i, N in enumerate(range(self.n_lo, self.n_thr + 1)):
            if N + self.beta0 <= 0:
                out[i] = self.k_lo - 1
                continue
            K = terminal_threshold(N, self.prior_belief, self.requirement, self.k_lo, start=K)
            out[i] = K
        out.setflags(write=False)
        return out

    def is_terminal(self, K, N):
        if self.k_lo <= K and self.n_lo <= N <= self.n_thr:
            return K <= self.terminal_thresholds[N - self.n_lo]
        return is_terminal(K, N, self.prior_belief, self.requirement)

    def rate_params(self, s: State):
        """Effective (shape, rate) of the predictive for state ``s``."""
        return s.K + self.alpha0, s.N + self.beta0 + s.beta_I

    def is_valid(self, s: State):
        alpha, beta = self.rate_params(s)
        return s.K >= self.k_lo and s.N >= self.n_lo and alpha > 0 and beta > 0

    def min_beta_i(self, N):
        """Smallest innovation level keeping the rate parameter positive at N."""
        return max(self.beta_i_min, math.floor(-(N + self.beta0)) + 1)


@dataclass(frozen=True)
class ObservationDist:
    """Negative binomial predictive over the event count in the next ``n`` tests."""

    n: int
    alpha: float
    beta: float

    def logpmf(self, k):
        return nb_logpmf(k, self.n, self.alpha, self.beta)

    def pmf(self, k):
        return math.exp(self.logpmf(k)) if k >= 0 else 0.0

    @property
    def mean(self):
        return self.n * self.alpha / self.beta

    @cached_property
    def truncation_index(self):
        """Smallest k whose CDF reaches ``1 - 1e-12``."""
        return len(self.probs()) - 1

    def probs(self):
        out = []
        total = 0.0
        k = 0
        while True:
            p = self.pmf(k)
            out.append(p)
            total += p
            if total >= 1.0 - TAIL_MASS or (k > self.mean and p == 0.0):
                return np.array(out)
            k += 1


def _check_state(s: State, spec: ProblemSpec):
    if not spec.is_valid(s):
        raise ValueError(f"state {s} is not valid under this problem (non-positive Gamma parameters)")


def observation_dist(s: State, n: int, spec: ProblemSpec) -> ObservationDist:
    _check_state(s, spec)
    if not 1 <= n <= spec.n_cap:
        raise ValueError(f"n must lie in [1, n_cap={spec.n_cap}], got {n}")
    alpha, beta = spec.rate_params(s)
    return ObservationDist(n, alpha, beta)


def reward(s: State, n: int, k: int, spec: ProblemSpec) -> float:
    """Terminal bonus for the successor record minus the per-event penalty."""
    _check_state(s, spec)
    terminal = spec.is_terminal(s.K + k, s.N + n)
    return spec.eta * terminal - (1.0 - spec.eta) * k


def expected_penalty(s: State, n: int, spec: ProblemSpec) -> float:
    alpha, beta = spec.rate_params(s)
    return (1.0 - spec.eta) * n * alpha / beta


def action_upper_bound(s: State, spec: ProblemSpec) -> int:
    """Largest test count that can beat doing nothing, clipped to ``n_cap``."""
    _check_state(s, spec)
    if spec.is_terminal(s.K, s.N):
        return 0
    alpha, beta = spec.rate_params(s)
    bound = math.floor(spec.eta * beta / ((1.0 - spec.eta) * alpha) + _BOUND_SLACK)
    return min(spec.n_cap, bound)


def innovation_transition(beta_i: int, n: int, d: InnovationDist, spec: ProblemSpec, n_next: int = None):
    """Distribution of the next innovation level after ``n`` tests.

    One increment is drawn per quarter and scaled by ``n``. Levels are clamped to
    the configured range; when ``n_next`` is given the lower clamp also keeps the
    rate parameter at ``n_next`` cumulative tests positive.
    """
    if n == 0:
        return {beta_i: 1.0}
    lo = spec.beta_i_min if n_next is None else max(spec.beta_i_min, spec.min_beta_i(n_next))
    out = {}
    for delta, p in zip(d.support, d.probs):
        if p == 0:
            continue
        b = min(spec.beta_i_max, max(lo, beta_i + n * delta))
        out[b] = out.get(b, 0.0) + p
    return out
