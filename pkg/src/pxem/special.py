"""Student-t density and distribution function, and their special-function backends.

All functions are scalar and pure. The distribution function is evaluated
through the regularized incomplete beta function,

    P(T > |x|) = I_w(nu/2, 1/2) / 2,   w = nu / (nu + x^2),

computed in log space by a continued fraction (modified Lentz), so the
tails stay accurate for small ``nu`` and large ``|x|``.
"""
import math

from pxem._backend import kernels
from pxem.errors import DomainError

__all__ = [
    "log_gamma",
    "log_inc_beta_reg",
    "inc_beta_reg",
    "t_pdf",
    "t_logpdf",
    "t_cdf",
    "t_logcdf",
    "t_sf",
]


def _check_nu(nu):
    if not (nu > 0.0) or math.isinf(nu):
        raise DomainError(f"degrees of freedom must be positive and finite, got {nu!r}")


def log_gamma(x):
    """ln|Gamma(x)| for x > 0."""
    if not (x > 0.0) or math.isinf(x):
        raise DomainError(f"log_gamma needs a positive finite argument, got {x!r}")
    return math.lgamma(x)


def log_inc_beta_reg(x, a, b):
    """Natural log of the regularized incomplete beta function I_x(a, b).

    Returns ``-inf`` at ``x == 0`` and ``0.0`` at ``x == 1``.
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if not (a > 0.0) or not (b > 0.0) or math.isinf(a) or math.isinf(b):
        raise DomainError(f"shape parameters must be positive, got a={a!r}, b={b!r}")
    return kernels.log_ibeta(float(x), 1.0 - float(x), float(a), float(b))


def inc_beta_reg(x, a, b):
    """Regularized incomplete beta function I_x(a, b)."""
    return math.exp(log_inc_beta_reg(x, a, b))


def t_logpdf(x, nu):
    if not math.isfinite(x):
        raise DomainError(f"t_pdf needs a finite argument, got {x!r}")
    _check_nu(nu)
    return kernels.t_logpdf(float(x), float(nu))


def t_pdf(x, nu):
    """Density of the standard Student-t distribution with ``nu`` degrees of freedom."""
    return math.exp(t_logpdf(x, nu))


def t_logcdf(x, nu):
    """log P(T <= x), accurate far into both tails."""
    if math.isnan(x):
        raise DomainError("t_cdf argument is NaN")
    _check_nu(nu)
    return kernels.t_logcdf(float(x), float(nu))


def t_cdf(x, nu):
    """P(T <= x) for T ~ t_nu; exactly 0 and 1 at -inf and +inf."""
    if math.isnan(x):
        raise DomainError("t_cdf argument is NaN")
    _check_nu(nu)
    x = float(x)
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    if x == 0.0:
        return 0.5
    tail = math.exp(kernels.t_log_tail(x, float(nu)))
    return tail if x < 0.0 else 1.0 - tail


def t_sf(x, nu):
    """P(T > x) = t_cdf(-x, nu)."""
    return t_cdf(-x, nu)
