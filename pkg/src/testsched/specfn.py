"""Special functions for the Gamma and negative binomial computations.

Only the handful of functions the belief machinery needs: the log-gamma
function, the regularized lower incomplete gamma function and the
regularized incomplete beta function.
"""

import math
from numbers import Real

MAX_ITER = 500
TOL = 1e-14
_TINY = 1e-300


class ConvergenceError(ArithmeticError):
    """An iterative evaluation exceeded its iteration cap."""


def _check_positive(name, value):
    if not (isinstance(value, Real) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")


def log_gamma(a):
    """Natural log of the gamma function for ``a > 0``."""
    _check_positive("a", a)
    return math.lgamma(a)


def _iter_cap(a):
    # near x ~ a both expansions need O(sqrt(a)) terms
    return MAX_ITER + int(10.0 * math.sqrt(a))


def _log_prefactor(a, x):
    """log(x**a * exp(-x) / Gamma(a)), arranged to avoid cancellation for large a."""
    if a < 20.0:
        return -x + a * math.log(x) - math.lgamma(a)
    t = (x - a) / a
    # Stirling remainder of lgamma(a)
    r = 1.0 / (a * a)
    corr = (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / a
    core = -a * (t - math.log1p(t)) if abs(t) < 0.5 else a * (math.log(x) - math.log(a)) - (x - a)
    return core + 0.5 * math.log(a) - 0.5 * math.log(2.0 * math.pi) - corr


def _gamma_series(a, x):
    # P(a, x) by the power series, valid for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_iter_cap(a)):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * TOL:
            return total * math.exp(_log_prefactor(a, x))
    raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cfrac(a, x):
    # Q(a, x) by the modified Lentz continued fraction, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _iter_cap(a) + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < TOL:
            return math.exp(_log_prefactor(a, x)) * h
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def reg_lower_inc_gamma(a, x):
    """Regularized lower incomplete gamma function P(a, x).

    Uses the power series below ``x = a + 1`` and the continued fraction
    for the complement above it.
    """
    _check_positive("a", a)
    if not (isinstance(x, Real) and math.isfinite(x) and x >= 0):
        raise ValueError(f"x must be finite and non-negative, got {x!r}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cfrac(a, x))


def _beta_cfrac(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _iter_cap(max(a, b)) + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < TOL:
            return h
    raise ConvergenceError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def reg_inc_beta(a, b, p):
    """Regularized incomplete beta function I_p(a, b)."""
    _check_positive("a", a)
    _check_positive("b", b)
    if not (isinstance(p, Real) and 0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(p) + b * math.log1p(-p)
    )
    front = math.exp(log_front)
    if p < (a + 1.0) / (a + b + 2.0):
        value = front * _beta_cfrac(a, b, p) / a
    else:
        value = 1.0 - front * _beta_cfrac(b, a, 1.0 - p) / b
    return min(1.0, max(0.0, value))
