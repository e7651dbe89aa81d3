"""Poisson-Binomial toy model.

Complete data: Z ~ Poisson(lambda), X | Z ~ Binomial(Z, pi) with pi known;
only X is observed, so X ~ Poisson(pi * lambda) and the MLE is X / pi.

The expanded model activates pi as alpha (null value alpha0 = pi); both
Z ~ Poisson(lambda_star) and X | Z ~ Binomial(Z, alpha) are then estimable
from complete data and the observed model maps back through
lambda = (alpha / pi) * lambda_star.

Every step is a rational map, so the functions here accept
``fractions.Fraction`` inputs and keep them exact; the log-likelihoods
always come back as floats.
"""
from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from pxem.errors import BoundaryWarning, DomainError, PreconditionError

LAMBDA_FLOOR = 1e-300
ALPHA_EPS = sys.float_info.epsilon

# default surface grids: lambda_star log-spaced on [1, 60], alpha on [0.02, 0.98]
DEFAULT_LAMBDA_GRID = tuple(np.geomspace(1.0, 60.0, 60))
DEFAULT_ALPHA_GRID = tuple(np.round(np.linspace(0.02, 0.98, 49), 12))


@dataclass(frozen=True)
class ToyConfig:
    x_obs: int
    pi: float

    def __post_init__(self):
        if int(self.x_obs) != self.x_obs or self.x_obs < 0:
            raise DomainError(f"x_obs must be a nonnegative integer, got {self.x_obs!r}")
        if not (0 < self.pi < 1):
            raise DomainError(f"pi must lie in (0, 1), got {self.pi!r}")

    @property
    def mle(self):
        return self.x_obs / self.pi


@dataclass(frozen=True)
class ToyExpandedParam:
    lambda_star: float
    alpha: float

    def __post_init__(self):
        if not (self.lambda_star > 0):
            raise DomainError(f"lambda_star must be positive, got {self.lambda_star!r}")
        if not (0 < self.alpha < 1):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")


def _check_lambda(lam):
    if not (lam > 0) or not math.isfinite(lam):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")


def toy_e_step(cfg: ToyConfig, lam):
    """E(Z | X, lambda) = X + lambda * (1 - pi)."""
    _check_lambda(lam)
    return cfg.x_obs + lam * (1 - cfg.pi)


def toy_expanded_e_step(cfg: ToyConfig, xp: ToyExpandedParam):
    """E(Z | X) under the expanded model at (lambda_star, alpha)."""
    return cfg.x_obs + xp.lambda_star * (1 - xp.alpha)


def toy_m_step(cfg: ToyConfig, z_hat):
    if z_hat < cfg.x_obs:
        raise DomainError(f"imputed Z={z_hat!r} is below the observed X={cfg.x_obs}")
    if z_hat == 0:
        warnings.warn("imputed Z is 0; lambda clamped to its floor", BoundaryWarning, stacklevel=2)
        return LAMBDA_FLOOR
    return z_hat


def _clamp_alpha(alpha):
    if alpha <= 0:
        warnings.warn("alpha update hit 0 (X = 0); clamped to machine epsilon",
                      BoundaryWarning, stacklevel=3)
        return ALPHA_EPS
    if alpha >= 1:
        warnings.warn("alpha update hit 1; clamped below 1", BoundaryWarning, stacklevel=3)
        return 1 - ALPHA_EPS
    return alpha


def toy_px_m_step(cfg: ToyConfig, z_hat) -> ToyExpandedParam:
    """Complete-data MLEs lambda_star = Z, alpha = X / Z at the imputed Z."""
    if not (z_hat > 0):
        raise PreconditionError(f"PX-M step needs a positive imputed Z, got {z_hat!r}")
    return ToyExpandedParam(z_hat, _clamp_alpha(cfg.x_obs / z_hat))


def toy_cm_alpha_step(cfg: ToyConfig, z_hat, lambda_star) -> ToyExpandedParam:
    # the alpha part of Q is X ln(alpha) + (Z - X) ln(1 - alpha): free of lambda_star
    if not (z_hat > 0):
        raise PreconditionError(f"CM step needs a positive imputed Z, got {z_hat!r}")
    return ToyExpandedParam(lambda_star, _clamp_alpha(cfg.x_obs / z_hat))


def toy_reduce(cfg: ToyConfig, xp: ToyExpandedParam):
    return xp.alpha / cfg.pi * xp.lambda_star


def toy_loglik(cfg: ToyConfig, lam) -> float:
    """Observed-data log-likelihood of X ~ Poisson(pi * lambda)."""
    _check_lambda(lam)
    mean = cfg.pi * lam
    x = cfg.x_obs
    out = -float(mean) - math.lgamma(x + 1)
    if x:
        out += x * math.log(mean)
    return out


def toy_expanded_loglik(cfg: ToyConfig, xp: ToyExpandedParam) -> float:
    return toy_loglik(cfg, toy_reduce(cfg, xp))


def toy_q(cfg: ToyConfig, lam_t, lambda_star, alpha) -> float:
    """Expected expanded complete-data log-likelihood, parameter-free terms dropped.

    Z ln(lambda_star) - lambda_star + Z ln(1 - alpha) + X ln(alpha / (1 - alpha))
    with Z replaced by its conditional mean at (lam_t, alpha0).
    """
    z_hat = float(toy_e_step(cfg, lam_t))
    x = cfg.x_obs
    out = z_hat * math.log(lambda_star) - lambda_star + z_hat * math.log1p(-alpha)
    if x:
        out += x * (math.log(alpha) - math.log1p(-alpha))
    return out


class SurfacePoint(NamedTuple):
    lambda_star: float
    alpha: float
    L_star: float
    Q: float


def toy_surface_grid(cfg: ToyConfig, lam_t,
                     lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                     alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> list[SurfacePoint]:
    """L* and Q over a (lambda_star, alpha) grid, sorted by (lambda_star, alpha)."""
    _check_lambda(lam_t)
    if not len(lambda_grid) or not len(alpha_grid):
        raise DomainError("surface grids must be nonempty")
    for v in lambda_grid:
        if not (0 < v < math.inf):
            raise DomainError(f"lambda_star grid value {v!r} outside (0, inf)")
    for a in alpha_grid:
        if not (0 < a < 1):
            raise DomainError(f"alpha grid value {a!r} outside (0, 1)")
    rows = []
    for ls in sorted(lambda_grid):
        for a in sorted(alpha_grid):
            xp = ToyExpandedParam(float(ls), float(a))
            rows.append(SurfacePoint(xp.lambda_star, xp.alpha,
                                     toy_expanded_loglik(cfg, xp),
                                     toy_q(cfg, lam_t, xp.lambda_star, xp.alpha)))
    return rows


def toy_efficient_da(cfg: ToyConfig, lam) -> ToyExpandedParam:
    """Imputation point on the current likelihood level set that imputes Z = X / pi.

    Solves X + ls * (1 - a) = X / pi together with a * ls = lambda * pi.
    """
    _check_lambda(lam)
    if cfg.x_obs == 0:
        raise PreconditionError("efficient augmentation needs X > 0 (no interior solution)")
    x, pi = cfg.x_obs, cfg.pi
    lambda_star = x * (1 - pi) / pi + lam * pi
    alpha = lam * pi / lambda_star
    xp = ToyExpandedParam(lambda_star, alpha)
    # both defining equations must hold up to rounding
    on_level_set = abs(alpha * lambda_star - lam * pi) <= 1e-12 * max(1.0, abs(lam * pi))
    imputes_mle = abs(toy_expanded_e_step(cfg, xp) - x / pi) <= 1e-12 * max(1.0, x / pi)
    if not (on_level_set and imputes_mle):
        raise ArithmeticError("efficient augmentation solution failed its constraint check")
    return xp


@dataclass(frozen=True)
class ToyModel:
    """Adapter exposing the toy model to :mod:`pxem.engine`; theta = [lambda]."""

    cfg: ToyConfig

    def validate(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.array(theta))
        if theta.dtype.kind in "biu":
            theta = theta.astype(float)
        if theta.shape != (1,):
            raise PreconditionError(f"toy theta has one entry (lambda), got shape {theta.shape}")
        try:
            _check_lambda(theta[0])
        except DomainError as exc:
            raise PreconditionError(str(exc)) from None
        return theta

    def e_step(self, theta):
        return toy_e_step(self.cfg, theta[0])

    def m_step(self, z_hat):
        return np.array([toy_m_step(self.cfg, z_hat)])

    def px_m_step(self, z_hat) -> ToyExpandedParam:
        return toy_px_m_step(self.cfg, z_hat)

    def cm_alpha_step(self, z_hat, theta_star) -> ToyExpandedParam:
        return toy_cm_alpha_step(self.cfg, z_hat, theta_star[0])

    def reduce(self, xp: ToyExpandedParam):
        return np.array([toy_reduce(self.cfg, xp)])

    def loglik(self, theta) -> float:
        return toy_loglik(self.cfg, theta[0])

    def null_alpha(self):
        return self.cfg.pi
