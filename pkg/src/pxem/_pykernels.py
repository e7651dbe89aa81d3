"""Pure-Python numerical kernels.

This module mirrors ``_ckernels.pyx`` line for line and is used whenever the
compiled extension is unavailable. No argument validation happens here; the
public wrappers in :mod:`pxem.special` and :mod:`pxem.robit` do that.
"""
import math

import numpy as np

LOG_HALF = -math.log(2.0)
CF_TOL = 1e-14
CF_MAX_ITER = 300
FPMIN = 1e-300


def log_beta_cf(x, y, a, b):
    """log I_x(a, b) from the continued fraction, with y = 1 - x given exactly.

    Only accurate for x < (a + 1) / (a + b + 2); callers pick the branch.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            break
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(y) - math.log(a)
    )
    return log_front + math.log(h)


def log_ibeta(x, y, a, b):
    """log of the regularized incomplete beta I_x(a, b), y = 1 - x."""
    if x <= 0.0:
        return -math.inf
    if y <= 0.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return log_beta_cf(x, y, a, b)
    return math.log1p(-math.exp(log_beta_cf(y, x, b, a)))


def t_log_tail(x, nu):
    """log P(T > |x|) for T ~ t_nu."""
    x2 = x * x
    w = nu / (nu + x2)
    wc = x2 / (nu + x2)
    a = 0.5 * nu
    if w < (a + 1.0) / (a + 2.5):
        return LOG_HALF + log_beta_cf(w, wc, a, 0.5)
    return LOG_HALF + math.log1p(-math.exp(log_beta_cf(wc, w, 0.5, a)))


def t_logcdf(x, nu):
    if x == 0.0:
        return LOG_HALF
    if math.isinf(x):
        return 0.0 if x > 0 else -math.inf
    lt = t_log_tail(x, nu)
    if x < 0.0:
        return lt
    return math.log1p(-math.exp(lt))


def t_logpdf(x, nu):
    return (
        math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
        - 0.5 * math.log(nu * math.pi)
        - 0.5 * (nu + 1.0) * math.log1p(x * x / nu)
    )


def robit_rows(eta, y, nu):
    """Per-row robit E-step quantities.

    Returns ``(tau, z, tz2, bad)`` where ``tau`` and ``z`` are the conditional
    expectations of the precision and the latent score, ``tz2`` the row
    contribution to the expected weighted sum of squares, and ``bad`` the index
    of the first row whose truncation probability underflowed (or -1).
    """
    n = eta.shape[0]
    tau = np.empty(n)
    z = np.empty(n)
    tz2 = np.empty(n)
    c = math.sqrt(1.0 + 2.0 / nu)
    for i in range(n):
        e = float(eta[i])
        s = 2.0 * y[i] - 1.0
        log_num = t_logcdf(s * c * e, nu + 2.0)
        log_den = t_logcdf(s * e, nu)
        if math.isinf(log_num) or math.isinf(log_den):
            return tau, z, tz2, i
        t = math.exp(log_num - log_den)
        zi = e + s * math.exp(t_logpdf(e, nu) - log_num)
        tau[i] = t
        z[i] = zi
        tz2[i] = (nu + 1.0) - nu * t + t * e * (2.0 * zi - e)
    return tau, z, tz2, -1


def robit_loglik_rows(eta, y, nu):
    total = 0.0
    for i in range(eta.shape[0]):
        s = 2.0 * y[i] - 1.0
        total += t_logcdf(s * float(eta[i]), nu)
    return total
