"""Gamma beliefs over the hazardous event rate.

Rates are expressed per test of the reference test distance, so the Gamma
rate parameter counts tests and the shape parameter counts events.
"""

import math
from dataclasses import dataclass
from typing import Optional

from .specfn import log_gamma, reg_inc_beta, reg_lower_inc_gamma


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class GammaBelief:
    alpha: float
    beta: float

    def __post_init__(self):
        _require(self.alpha > 0 and math.isfinite(self.alpha), f"alpha must be positive, got {self.alpha}")
        _require(self.beta > 0 and math.isfinite(self.beta), f"beta must be positive, got {self.beta}")

    @property
    def mean(self):
        return self.alpha / self.beta

    @property
    def variance(self):
        return self.alpha / self.beta ** 2


@dataclass(frozen=True)
class PriorSpec:
    """Prior experience summarised as a mean rate and its variance."""

    mu: float
    sigma2: float

    def __post_init__(self):
        _require(self.mu > 0, f"prior.mu must be positive, got {self.mu}")
        _require(self.sigma2 > 0, f"prior.sigma2 must be positive, got {self.sigma2}")


@dataclass(frozen=True)
class SafetyRequirement:
    lambda_ref: float
    c_ref: float

    def __post_init__(self):
        _require(self.lambda_ref > 0, f"lambda_ref must be positive, got {self.lambda_ref}")
        _require(0 < self.c_ref < 1, f"c_ref must lie in (0, 1), got {self.c_ref}")


def prior_from_moments(p: PriorSpec) -> GammaBelief:
    """Moment-matched Gamma prior: rate mu/sigma2, shape mu*rate."""
    beta = p.mu / p.sigma2
    return GammaBelief(p.mu * beta, beta)


def update(b: GammaBelief, k: int, n: int) -> GammaBelief:
    """Posterior after observing ``k`` events in ``n`` tests."""
    _require(k >= 0 and n >= 0, f"k and n must be non-negative, got k={k}, n={n}")
    return GammaBelief(b.alpha + k, b.beta + n)


def credibility(b: GammaBelief, req: SafetyRequirement) -> float:
    """Posterior probability that the event rate does not exceed ``lambda_ref``."""
    return reg_lower_inc_gamma(b.alpha, b.beta * req.lambda_ref)


def effective_params(K, N, prior: Optional[GammaBelief]):
    a0, b0 = (prior.alpha, prior.beta) if prior is not None else (0.0, 0.0)
    return K + a0, N + b0


def is_terminal(K: int, N: int, prior: Optional[GammaBelief], req: SafetyRequirement) -> bool:
    """Whether the record of K events in N tests (plus prior) meets the release bar."""
    alpha, beta = effective_params(K, N, prior)
    if K < 0 or N < 0 or alpha <= 0 or beta <= 0:
        raise ValueError(f"state <K={K}, N={N}> has non-positive Gamma parameters")
    return credibility(GammaBelief(alpha, beta), req) >= req.c_ref


def nb_logpmf(k: int, n: int, alpha: float, beta: float) -> float:
    r = n * alpha
    return (
        log_gamma(k + r) - log_gamma(r) - math.lgamma(k + 1)
        - k * math.log1p(beta) + r * (math.log(beta) - math.log1p(beta))
    )


def nb_pmf(k: int, n: int, alpha: float, beta: float) -> float:
    """Probability of ``k`` events in ``n`` tests under a Gamma(alpha, beta) rate belief."""
    _require(k >= 0 and n >= 1, f"need k >= 0 and n >= 1, got k={k}, n={n}")
    return math.exp(nb_logpmf(k, n, alpha, beta))


def nb_cdf(k: int, n: int, alpha: float, beta: float) -> float:
    _require(k >= 0 and n >= 1, f"need k >= 0 and n >= 1, got k={k}, n={n}")
    return reg_inc_beta(n * alpha, k + 1, beta / (1.0 + beta))


def terminal_threshold(
    N: int, prior: Optional[GammaBelief], req: SafetyRequirement, k_lo: int, start: int = None
) -> int:
    """Largest K >= k_lo such that <K, N> is terminal, or ``k_lo - 1`` if none.

    ``start`` is a known terminal K (or ``k_lo - 1``) to resume the upward scan
    from; thresholds are nondecreasing in N so callers sweep N upward.
    """
    K = k_lo - 1 if start is None else start
    while is_terminal(K + 1, N, prior, req):
        K += 1
    return K
