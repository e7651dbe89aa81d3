"""Fixed-point drivers for EM, PX-EM and ECM over a pluggable model.

A model supplies the E step, the ordinary M step, the parameter-expanded
M step, a conditional update of the expansion parameter, the reduction map
back to the original parameter space and the observed-data log-likelihood.
The three schedules only differ in how those pieces are chained:

* EM:    theta <- m_step(e_step(theta))
* PX-EM: theta <- reduce(px_m_step(e_step(theta)))
* ECM:   theta* <- m_step(stats); theta <- reduce(cm_alpha_step(stats, theta*))

The E step is always evaluated at the current reduced parameter with the
expansion parameter at its null value.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from pxem.errors import DivergenceError, PreconditionError

log = logging.getLogger(__name__)

__all__ = [
    "ModelInterface",
    "StopRule",
    "StopReason",
    "IterRecord",
    "FitTrace",
    "Rates",
    "run_em",
    "run_px_em",
    "run_ecm",
    "run_schedule",
    "SCHEDULES",
    "rate_diagnostics",
    "tail_rate",
    "param_tail_rate",
    "ratio_series",
    "write_trace_csv",
    "read_trace_csv",
]


class ModelInterface(Protocol):
    """What the drivers need from a complete-data model.

    ``theta`` values are 1-D arrays. Expanded parameters and E-step
    statistics are opaque to the engine.
    """

    def validate(self, theta: np.ndarray) -> np.ndarray: ...
    def e_step(self, theta: np.ndarray) -> Any: ...
    def m_step(self, stats: Any) -> np.ndarray: ...
    def px_m_step(self, stats: Any) -> Any: ...
    def cm_alpha_step(self, stats: Any, theta_star: np.ndarray) -> Any: ...
    def reduce(self, xp: Any) -> np.ndarray: ...
    def loglik(self, theta: np.ndarray) -> float: ...
    def null_alpha(self) -> Any: ...


@dataclass(frozen=True)
class StopRule:
    loglik_tol: float = 1e-10
    param_tol: float = 1e-9
    max_iter: int = 10000

    def __post_init__(self):
        if not (self.loglik_tol > 0 and self.param_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


class StopReason(str, enum.Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "max_iter"
    DIVERGENCE = "divergence"


@dataclass(frozen=True)
class IterRecord:
    t: int
    theta: np.ndarray
    loglik: float


@dataclass
class FitTrace:
    """Iterates of one fit, starting with the initial value at ``t = 0``.

    When the fit stops on tolerance, the last record is the step that
    confirmed convergence; ``n_iter`` does not count it.
    """

    iterations: list[IterRecord]
    converged: bool
    stop_reason: StopReason
    schedule: str = ""
    message: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return self.iterations[-1].theta

    @property
    def loglik(self) -> float:
        return self.iterations[-1].loglik

    @property
    def n_iter(self) -> int:
        steps = len(self.iterations) - 1
        if self.stop_reason is StopReason.TOLERANCE:
            steps -= 1
        return steps

    @property
    def logliks(self) -> np.ndarray:
        return np.array([r.loglik for r in self.iterations])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([np.asarray(r.theta, dtype=float) for r in self.iterations])

    def is_monotone(self, slack: float = 1e-10) -> bool:
        ll = self.logliks
        return bool(np.all(np.diff(ll) >= -slack))

    def first_within(self, limit: float, tol: float) -> int | None:
        """First iteration index with |loglik - limit| < tol, if any."""
        for r in self.iterations:
            if abs(r.loglik - limit) < tol:
                return r.t
        return None


def _max_abs_change(a, b) -> float:
    return float(max(abs(x - y) for x, y in zip(a, b)))


def _finite(theta) -> bool:
    return all(math.isfinite(v) for v in theta)


def _drive(model, theta0, rule: StopRule, step: Callable, name: str) -> FitTrace:
    theta = model.validate(theta0)
    ll = model.loglik(theta)
    records = [IterRecord(0, theta, ll)]
    if not math.isfinite(ll):
        return FitTrace(records, False, StopReason.DIVERGENCE, name,
                        "log-likelihood is not finite at the starting value")
    for t in range(1, rule.max_iter + 1):
        try:
            new = step(theta)
            if not _finite(new):
                raise DivergenceError(f"non-finite parameter at iteration {t}")
            new_ll = model.loglik(new)
        except DivergenceError as exc:
            log.warning("%s diverged: %s", name, exc)
            return FitTrace(records, False, StopReason.DIVERGENCE, name, str(exc))
        records.append(IterRecord(t, new, new_ll))
        if not math.isfinite(new_ll):
            msg = f"non-finite log-likelihood at iteration {t}"
            log.warning("%s diverged: %s", name, msg)
            return FitTrace(records, False, StopReason.DIVERGENCE, name, msg)
        if abs(new_ll - ll) < rule.loglik_tol and _max_abs_change(new, theta) < rule.param_tol:
            return FitTrace(records, True, StopReason.TOLERANCE, name)
        theta, ll = new, new_ll
    return FitTrace(records, False, StopReason.MAX_ITER, name,
                    f"no convergence within {rule.max_iter} iterations")


def run_em(model: ModelInterface, theta0, rule: StopRule = StopRule()) -> FitTrace:
    def step(theta):
        return model.m_step(model.e_step(theta))

    return _drive(model, theta0, rule, step, "em")


def run_px_em(model: ModelInterface, theta0, rule: StopRule = StopRule()) -> FitTrace:
    def step(theta):
        return model.reduce(model.px_m_step(model.e_step(theta)))

    return _drive(model, theta0, rule, step, "pxem")


def run_ecm(model: ModelInterface, theta0, rule: StopRule = StopRule()) -> FitTrace:
    def step(theta):
        stats = model.e_step(theta)
        theta_star = model.m_step(stats)
        return model.reduce(model.cm_alpha_step(stats, theta_star))

    return _drive(model, theta0, rule, step, "ecm")


SCHEDULES = {"em": run_em, "ecm": run_ecm, "pxem": run_px_em}


def run_schedule(name: str, model: ModelInterface, theta0, rule: StopRule = StopRule()) -> FitTrace:
    try:
        runner = SCHEDULES[name]
    except KeyError:
        raise ValueError(f"unknown schedule {name!r}; choose from {sorted(SCHEDULES)}") from None
    return runner(model, theta0, rule)


@dataclass
class Rates:
    """Successive-error ratios |v(t+1) - v(inf)| / |v(t) - v(inf)|.

    ``loglik`` and each list in ``theta`` hold ``(t, ratio)`` pairs; entries
    whose denominator falls below the floor are left out.
    """

    loglik: list[tuple[int, float]]
    theta: list[list[tuple[int, float]]]
    loglik_limit: float
    theta_limit: Sequence

    @property
    def loglik_values(self) -> list[float]:
        return [r for _, r in self.loglik]

    def theta_values(self, j: int) -> list[float]:
        return [r for _, r in self.theta[j]]


def ratio_series(values, limit, floor: float = 1e-14) -> list[tuple[int, float]]:
    """(t, |v[t+1] - limit| / |v[t] - limit|) for every t whose denominator is >= floor."""
    out = []
    for t in range(len(values) - 1):
        den = abs(values[t] - limit)
        if den < floor:
            continue
        out.append((t, float(abs(values[t + 1] - limit) / den)))
    return out


def rate_diagnostics(trace: FitTrace, per_coordinate: bool = False, *,
                     loglik_limit: float | None = None, theta_limit=None,
                     floor: float = 1e-14) -> Rates:
    """Per-iteration convergence rates of a trace.

    The limits default to the last record of the trace. Pass the exact limit
    when it is known; the last iterate of a finite trace makes the final ratio
    zero by construction.
    """
    if len(trace.iterations) < 3:
        raise PreconditionError("rate diagnostics need at least 3 trace records")
    ll = [r.loglik for r in trace.iterations]
    ll_lim = ll[-1] if loglik_limit is None else loglik_limit
    th_rates = []
    th_lim = trace.theta if theta_limit is None else theta_limit
    if per_coordinate:
        for j in range(len(trace.theta)):
            col = [r.theta[j] for r in trace.iterations]
            th_rates.append(ratio_series(col, th_lim[j], floor))
    return Rates(ratio_series(ll, ll_lim, floor), th_rates, ll_lim, th_lim)


def tail_rate(rates: Sequence[float], k: int = 3) -> float:
    """Median of the last ``k`` rate entries."""
    if not rates:
        raise PreconditionError("no rate entries to summarize")
    return float(statistics.median(list(rates)[-k:]))


def param_tail_rate(trace: FitTrace, k: int = 3, margin: float = 1e6) -> float | None:
    """Linear rate of the parameter sequence near its end, or None if unresolved.

    Uses max-norm distances to the final iterate, keeping only those at least
    ``margin`` times the last step so the final iterate's own error is negligible.
    """
    th = trace.thetas
    if len(th) < 3:
        return None
    dist = np.max(np.abs(th - th[-1]), axis=1)
    step = float(np.max(np.abs(th[-1] - th[-2])))
    floor = max(margin * step, 1e-14)
    ratios = [dist[t + 1] / dist[t] for t in range(len(th) - 1) if dist[t] >= floor]
    if not ratios:
        return None
    return tail_rate(ratios, k)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_trace_csv(trace: FitTrace, fh) -> None:
    """Write ``iter,loglik,theta_1..theta_p`` rows, one per trace record."""
    p = len(trace.theta)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["iter", "loglik"] + [f"theta_{j + 1}" for j in range(p)])
    for r in trace.iterations:
        w.writerow([r.t, _fmt(r.loglik)] + [_fmt(v) for v in r.theta])


def read_trace_csv(fh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_trace_csv`: returns (iter, loglik, theta matrix)."""
    rows = [row for row in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    if header[:2] != ["iter", "loglik"]:
        raise ValueError(f"not a trace CSV header: {header}")
    arr = np.array(body, dtype=float).reshape(len(body), len(header))
    return arr[:, 0].astype(int), arr[:, 1], arr[:, 2:]
