# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels; see ``_pykernels.py`` for the reference version."""
from libc.math cimport exp, fabs, isinf, lgamma, log, log1p, sqrt, M_PI, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double LOG_HALF = -0.69314718055994530942
cdef double CF_TOL = 1e-14
cdef int CF_MAX_ITER = 300
cdef double FPMIN = 1e-300


cdef double _log_beta_cf(double x, double y, double a, double b) noexcept nogil:
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d, h, aa, delta
    cdef int m, m2
    d = 1.0 - qab * x / qap
    if fabs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < CF_TOL:
            break
    return (lgamma(a + b) - lgamma(a) - lgamma(b)
            + a * log(x) + b * log(y) - log(a) + log(h))


cdef double _log_ibeta(double x, double y, double a, double b) noexcept nogil:
    if x <= 0.0:
        return -INFINITY
    if y <= 0.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_beta_cf(x, y, a, b)
    return log1p(-exp(_log_beta_cf(y, x, b, a)))


cdef double _t_log_tail(double x, double nu) noexcept nogil:
    cdef double x2 = x * x
    cdef double w = nu / (nu + x2)
    cdef double wc = x2 / (nu + x2)
    cdef double a = 0.5 * nu
    if w < (a + 1.0) / (a + 2.5):
        return LOG_HALF + _log_beta_cf(w, wc, a, 0.5)
    return LOG_HALF + log1p(-exp(_log_beta_cf(wc, w, 0.5, a)))


cdef double _t_logcdf(double x, double nu) noexcept nogil:
    cdef double lt
    if x == 0.0:
        return LOG_HALF
    if isinf(x):
        return 0.0 if x > 0 else -INFINITY
    lt = _t_log_tail(x, nu)
    if x < 0.0:
        return lt
    return log1p(-exp(lt))


cdef double _t_logpdf(double x, double nu) noexcept nogil:
    return (lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu)
            - 0.5 * log(nu * M_PI)
            - 0.5 * (nu + 1.0) * log1p(x * x / nu))


def log_beta_cf(double x, double y, double a, double b):
    return _log_beta_cf(x, y, a, b)


def log_ibeta(double x, double y, double a, double b):
    return _log_ibeta(x, y, a, b)


def t_log_tail(double x, double nu):
    return _t_log_tail(x, nu)


def t_logcdf(double x, double nu):
    return _t_logcdf(x, nu)


def t_logpdf(double x, double nu):
    return _t_logpdf(x, nu)


def robit_rows(eta_in, y_in, double nu):
    cdef const double[::1] eta = np.ascontiguousarray(eta_in, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = eta.shape[0], i
    tau_arr = np.empty(n)
    z_arr = np.empty(n)
    tz2_arr = np.empty(n)
    cdef double[::1] tau = tau_arr
    cdef double[::1] z = z_arr
    cdef double[::1] tz2 = tz2_arr
    cdef double c = sqrt(1.0 + 2.0 / nu)
    cdef double e, s, log_num, log_den, t, zi
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            e = eta[i]
            s = 2.0 * y[i] - 1.0
            log_num = _t_logcdf(s * c * e, nu + 2.0)
            log_den = _t_logcdf(s * e, nu)
            if isinf(log_num) or isinf(log_den):
                bad = i
                break
            t = exp(log_num - log_den)
            zi = e + s * exp(_t_logpdf(e, nu) - log_num)
            tau[i] = t
            z[i] = zi
            tz2[i] = (nu + 1.0) - nu * t + t * e * (2.0 * zi - e)
    return tau_arr, z_arr, tz2_arr, bad


def robit_loglik_rows(eta_in, y_in, double nu):
    cdef const double[::1] eta = np.ascontiguousarray(eta_in, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double total = 0.0
    with nogil:
        for i in range(eta.shape[0]):
            total += _t_logcdf((2.0 * y[i] - 1.0) * eta[i], nu)
    return total
