"""Independent reference implementations used by the tests.

Nothing here calls into the package's numerical code; the only things read
from a ProblemSpec are its plain parameters.
"""

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats

TAIL = 1e-12
SNAP = 1e-13


def lower_gamma_quad(a, x):
    """Regularized lower incomplete gamma by adaptive quadrature of its defining integral."""
    if x == 0:
        return 0.0
    if a < 1:
        # u = t**a removes the endpoint singularity
        val, _ = integrate.quad(lambda u: math.exp(-u ** (1.0 / a)), 0.0, x ** a, epsabs=1e-14, epsrel=1e-12,
                                limit=400)
        return val / math.gamma(a + 1.0)
    lg = math.lgamma(a)
    f = lambda t: math.exp((a - 1.0) * math.log(t) - t - lg) if t > 0 else 0.0  # noqa: E731
    pts = [a - 1.0] if 0 < a - 1.0 < x else None
    val, _ = integrate.quad(f, 0.0, x, points=pts, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def lower_gamma_int(a, x):
    """Finite-sum form for integer a: 1 - exp(-x) sum_{j<a} x^j / j!."""
    return 1.0 - math.fsum(math.exp(-x + j * math.log(x) - math.lgamma(j + 1)) for j in range(a)) if x > 0 else 0.0


def nb_mixture_quad(k, n, alpha, beta):
    """P(k) of a Poisson whose mean is Gamma(n*alpha, rate beta), by quadrature over the mean."""
    shape = n * alpha
    g = stats.gamma(shape, scale=1.0 / beta)
    hi = g.ppf(1 - 1e-15)
    val, _ = integrate.quad(lambda lam: stats.poisson.pmf(k, lam) * g.pdf(lam), 0.0, hi, epsabs=1e-14,
                            epsrel=1e-11, limit=400, points=[g.mean()])
    return val


def micro_spec_params(rng):
    """Random small problem as keyword arguments for ProblemSpec (plus prior/innovation payloads)."""
    kw = dict(
        lambda_ref=float(rng.uniform(0.3, 2.0)),
        c_ref=float(rng.uniform(0.7, 0.97)),
        eta=float(rng.uniform(0.6, 0.97)),
        gamma=float(rng.choice([0.0, 0.5, 0.9, 1.0])),
        horizon=int(rng.integers(1, 4)),
        k_max=int(rng.integers(2, 7)),
        n_max=int(rng.integers(2, 7)),
        n_cap=int(rng.integers(2, 9)),
        beta_i_min=-int(rng.integers(0, 3)),
        beta_i_max=int(rng.integers(0, 4)),
        prior=None,
        innovation=None,
    )
    if rng.random() < 0.5:
        mu = float(rng.uniform(0.2, 1.5))
        kw["prior"] = (mu, float(rng.uniform(0.05, 2.0)))
    if rng.random() < 0.5:
        vals = sorted(rng.choice([-1, 0, 1, 2], size=int(rng.integers(2, 4)), replace=False).tolist())
        w = rng.dirichlet(np.ones(len(vals)))
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        kw["innovation"] = (tuple(vals), tuple(float(v) for v in w))
    return kw


class Expectimax:
    """Exhaustive finite-horizon expectimax on the grid with immediate-value boundary semantics.

    Expectations run over every k until the predictive CDF reaches 1 - 1e-12,
    with no zero-utility truncation.
    """

    def __init__(self, spec):
        self.T = spec.horizon
        self.lam = spec.requirement.lambda_ref
        self.c = spec.requirement.c_ref
        self.eta = spec.eta
        self.gamma = spec.gamma
        if spec.prior is not None:
            mu, s2 = spec.prior.mu, spec.prior.sigma2
            self.a0, self.b0 = mu * mu / s2, mu / s2
        else:
            self.a0 = self.b0 = 0.0
        self.k_max, self.n_max, self.n_cap = spec.k_max, spec.n_max, spec.n_cap
        self.b_lo = spec.beta_i_min if any(v < 0 for v in spec.innovation.support) else 0
        self.b_hi = spec.beta_i_max if any(v > 0 for v in spec.innovation.support) else 0
        self.inn = [(v, q) for v, q in zip(spec.innovation.support, spec.innovation.probs) if q > 0]
        self.V = lru_cache(maxsize=None)(self._V)
        self.terminal = lru_cache(maxsize=None)(self._terminal)
        self.pmf = lru_cache(maxsize=None)(self._pmf)

    def _terminal(self, K, N):
        return special.gammainc(K + self.a0, (N + self.b0) * self.lam) >= self.c

    def _pmf(self, n, alpha, beta):
        r, p = n * alpha, beta / (1.0 + beta)
        m = 16
        while True:
            ks = np.arange(m)
            pm = stats.nbinom.pmf(ks, r, p)
            if math.fsum(pm) >= 1.0 - TAIL:
                return pm
            m *= 2

    def bound(self, K, N, b):
        alpha, beta = K + self.a0, N + self.b0 + b
        return min(self.n_cap, math.floor(self.eta * beta / ((1.0 - self.eta) * alpha) + 1e-9))

    def successors_b(self, b, n, Np):
        lo = max(self.b_lo, math.floor(-(Np + self.b0)) + 1)
        return [(min(self.b_hi, max(lo, b + n * v)), q) for v, q in self.inn]

    def q_value(self, K, N, b, t, n, future):
        pm = self.pmf(n, K + self.a0, N + self.b0 + b)
        Np = N + n
        tot = []
        for k, w in enumerate(pm):
            Kp = K + k
            term = self.terminal(Kp, Np)
            r = self.eta * term - (1.0 - self.eta) * k
            if future is not None and not term:
                r += self.gamma * math.fsum(q * future(Kp, Np, bp) for bp, q in self.successors_b(b, n, Np))
            tot.append(w * r)
        return math.fsum(tot)

    def _best(self, K, N, b, t, future):
        if self.terminal(K, N):
            return 0.0, 0
        best, n_star = 0.0, 0
        for n in range(1, self.bound(K, N, b) + 1):
            v = self.q_value(K, N, b, t, n, future)
            if v > best:
                best, n_star = v, n
        if best < SNAP:
            return 0.0, 0
        return best, n_star

    def immediate(self, K, N, b):
        return self._best(K, N, b, self.T, None)

    def _V(self, K, N, b, t):
        if t == self.T or self.gamma == 0.0:
            return self.immediate(K, N, b)

        def future(Kp, Np, bp):
            if Kp <= self.k_max and Np <= self.n_max:
                return self.V(Kp, Np, bp, t + 1)[0]
            return self.immediate(Kp, Np, bp)[0]

        return self._best(K, N, b, t, future)


def untruncated_backup(sol, K, N, b, t, n):
    """Q-value of action n at (K, N, b, t) against the solved next-step table, summing every k."""
    from testsched.solver import immediate_action
    from testsched.model import State

    spec = sol.spec
    ex = Expectimax(spec)
    if t == spec.horizon or spec.gamma == 0.0:
        return ex.q_value(K, N, b, t, n, None)

    def future(Kp, Np, bp):
        if Kp <= spec.k_max and Np <= spec.n_max:
            return sol.utility.at(Kp, Np, bp, t + 1)
        return immediate_action(State(Kp, Np, bp), spec)[1]

    return ex.q_value(K, N, b, t, n, future)
