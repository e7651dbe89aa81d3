"""Robit regression: binary regression with a Student-t link of known df.

P(y_i = 1 | x_i, beta) = F_nu(x_i' beta).

The complete data add, for each row, a precision tau_i ~ Gamma(nu/2, nu/2)
and a latent score z_i | tau_i ~ N(x_i' beta, 1/tau_i) with y_i = 1{z_i > 0}.
Parameter expansion rescales both: tau_i / alpha ~ Gamma(nu/2, nu/2) and
z_i | tau_i ~ N(x_i' beta_star, sigma^2 / tau_i), which maps back to the
observed model through beta = (sqrt(alpha) / sigma) * beta_star.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from pxem._backend import kernels
from pxem.errors import (
    BoundaryWarning,
    DegenerateFitError,
    DivergenceError,
    DomainError,
    PreconditionError,
    SingularMatrixError,
)

ETA_CAP = 300.0
COND_LIMIT = 1e12
BETA_LIMIT = 1e6


class ReductionVariant(str, enum.Enum):
    """Adjustment factor used to map (beta_star, alpha, sigma) back to beta.

    Only CORRECT preserves the observed-data model; the other two are the
    mis-specified factors alpha/sigma and alpha/sigma^2, kept for comparison.
    """

    CORRECT = "correct"
    ALPHA_OVER_SIGMA = "alpha-over-sigma"
    ALPHA_OVER_SIGMA_SQ = "alpha-over-sigma-sq"

    def factor(self, alpha: float, sigma: float) -> float:
        if self is ReductionVariant.CORRECT:
            return np.sqrt(alpha) / sigma
        if self is ReductionVariant.ALPHA_OVER_SIGMA:
            return alpha / sigma
        return alpha / sigma**2


@dataclass(frozen=True, eq=False)
class RobitData:
    x: np.ndarray
    y: np.ndarray
    nu: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        n, p = x.shape
        if y.shape[0] != n:
            raise DomainError(f"x has {n} rows but y has {y.shape[0]} entries")
        if n < p or p < 1:
            raise DomainError(f"need n >= p >= 1, got n={n}, p={p}")
        if not np.all((y == 0) | (y == 1)):
            raise DomainError("responses must be 0 or 1")
        if not np.all(np.isfinite(x)):
            raise DomainError("design matrix has non-finite entries")
        if not (self.nu > 0) or not np.isfinite(self.nu):
            raise DomainError(f"degrees of freedom must be positive, got {self.nu!r}")
        rank = np.linalg.matrix_rank(x)
        if rank < p:
            raise SingularMatrixError(f"design matrix has rank {rank} < p = {p}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class RobitExpandedParam:
    beta_star: np.ndarray
    alpha: float
    sigma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma > 0):
            raise DomainError(f"alpha and sigma must be positive, got {self.alpha!r}, {self.sigma!r}")


@dataclass(frozen=True, eq=False)
class RobitEStats:
    """Imputed sufficient statistics and the per-row expectations behind them."""

    s_txx: np.ndarray
    s_txz: np.ndarray
    s_t: float
    s_tz2: float
    tau_hat: np.ndarray
    z_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.tau_hat.shape[0]


def _eta(d: RobitData, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.p,):
        raise DomainError(f"beta must have length {d.p}, got shape {beta.shape}")
    eta = d.x @ beta
    if not np.all(np.isfinite(eta)):
        raise DomainError("non-finite linear predictor")
    return eta


def robit_loglik(d: RobitData, beta) -> float:
    """Observed-data log-likelihood, summed as log F_nu(+-x'beta) per row."""
    return float(kernels.robit_loglik_rows(_eta(d, beta), d.y, d.nu))


def robit_e_step(d: RobitData, beta) -> RobitEStats:
    eta = _eta(d, beta)
    if np.any(np.abs(eta) > ETA_CAP):
        warnings.warn(f"|x'beta| exceeds {ETA_CAP:g}; capped for the E step",
                      BoundaryWarning, stacklevel=2)
        eta = np.clip(eta, -ETA_CAP, ETA_CAP)
    tau, z, tz2, bad = kernels.robit_rows(eta, d.y, d.nu)
    if bad >= 0:
        raise DomainError(f"truncation probability underflowed at row {bad}")
    x = d.x
    return RobitEStats(
        s_txx=(x * tau[:, None]).T @ x,
        s_txz=x.T @ (tau * z),
        s_t=float(np.sum(tau)),
        s_tz2=float(np.sum(tz2)),
        tau_hat=tau,
        z_hat=z,
    )


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for symmetric positive-definite a.

    Cholesky first, Bunch-Kaufman if that fails. Matrices with condition
    number above COND_LIMIT are rejected, naming the pivot that a pivoted
    Cholesky factorization finds numerically dependent.
    """
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        _, piv, rank, _ = scipy.linalg.lapack.dpstrf(a, lower=1)
        pivot = int(piv[min(rank, a.shape[0] - 1)]) - 1
        raise SingularMatrixError(
            f"weighted cross-product matrix is singular or ill-conditioned "
            f"(condition number {cond:.3g}); offending pivot: column {pivot}",
            pivot=pivot,
        )
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(a, lower=True), b)
    except np.linalg.LinAlgError:
        return scipy.linalg.solve(a, b, assume_a="sym")


def robit_m_step(d: RobitData, s: RobitEStats) -> np.ndarray:
    """Weighted least squares: solve S_txx beta = S_txz."""
    return solve_spd(s.s_txx, s.s_txz)


def robit_px_m_step(d: RobitData, s: RobitEStats) -> RobitExpandedParam:
    beta_star = solve_spd(s.s_txx, s.s_txz)
    n = s.n
    sigma2 = (s.s_tz2 - s.s_txz @ beta_star) / n
    if not sigma2 > 0:
        raise DegenerateFitError(
            f"residual scale estimate is {sigma2:.3g} <= 0; the data may be perfectly separated")
    return RobitExpandedParam(beta_star, s.s_t / n, float(np.sqrt(sigma2)))


def robit_cm_alpha_step(d: RobitData, s: RobitEStats, beta_star) -> RobitExpandedParam:
    """Maximize the expanded Q over (alpha, sigma) with beta_star held fixed."""
    b = np.asarray(beta_star, dtype=float)
    n = s.n
    sigma2 = (s.s_tz2 - 2.0 * b @ s.s_txz + b @ s.s_txx @ b) / n
    if not sigma2 > 0:
        raise DegenerateFitError(
            f"residual scale estimate is {sigma2:.3g} <= 0; the data may be perfectly separated")
    return RobitExpandedParam(b, s.s_t / n, float(np.sqrt(sigma2)))


def robit_reduce(xp: RobitExpandedParam,
                 variant: ReductionVariant = ReductionVariant.CORRECT) -> np.ndarray:
    return ReductionVariant(variant).factor(xp.alpha, xp.sigma) * np.asarray(xp.beta_star, dtype=float)


@dataclass(frozen=True, eq=False)
class RobitModel:
    """Adapter exposing robit regression to :mod:`pxem.engine`; theta = beta."""

    data: RobitData
    variant: ReductionVariant = ReductionVariant.CORRECT

    def validate(self, theta) -> np.ndarray:
        theta = np.array(theta, dtype=float).ravel()
        if theta.shape != (self.data.p,):
            raise PreconditionError(f"beta must have length {self.data.p}, got {theta.shape[0]}")
        if not np.all(np.isfinite(theta)):
            raise PreconditionError("starting beta has non-finite entries")
        return theta

    def e_step(self, theta) -> RobitEStats:
        if np.max(np.abs(theta)) > BETA_LIMIT:
            raise DivergenceError(
                f"coefficients exceed {BETA_LIMIT:g} in magnitude; the data may be separated")
        # a capped E step has a spurious fixed point, so treat the cap as a runaway fit
        eta_max = float(np.max(np.abs(self.data.x @ theta)))
        if eta_max > ETA_CAP:
            raise DivergenceError(
                f"|x'beta| reached {eta_max:.3g} > {ETA_CAP:g}; the data may be separated")
        try:
            return robit_e_step(self.data, theta)
        except DomainError as exc:
            raise DivergenceError(str(exc)) from exc

    def m_step(self, stats: RobitEStats) -> np.ndarray:
        return robit_m_step(self.data, stats)

    def px_m_step(self, stats: RobitEStats) -> RobitExpandedParam:
        return robit_px_m_step(self.data, stats)

    def cm_alpha_step(self, stats: RobitEStats, theta_star) -> RobitExpandedParam:
        return robit_cm_alpha_step(self.data, stats, theta_star)

    def reduce(self, xp: RobitExpandedParam) -> np.ndarray:
        return robit_reduce(xp, self.variant)

    def loglik(self, theta) -> float:
        try:
            return robit_loglik(self.data, theta)
        except DomainError as exc:
            raise DivergenceError(str(exc)) from exc

    def null_alpha(self) -> tuple[float, float]:
        return (1.0, 1.0)
