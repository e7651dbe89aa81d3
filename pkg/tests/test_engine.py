import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxem.engine import (
    FitTrace,
    IterRecord,
    StopReason,
    StopRule,
    param_tail_rate,
    rate_diagnostics,
    ratio_series,
    read_trace_csv,
    run_ecm,
    run_em,
    run_px_em,
    run_schedule,
    tail_rate,
    write_trace_csv,
)
from pxem.errors import DivergenceError, PreconditionError
from pxem.toy import ToyConfig, ToyExpandedParam, ToyModel, toy_reduce

TOY = ToyModel(ToyConfig(8, 0.25))
EXACT = ToyModel(ToyConfig(8, Fraction(1, 4)))


class NullAlphaToy(ToyModel):
    """Toy model whose CM step keeps alpha at its null value."""

    def cm_alpha_step(self, z_hat, theta_star):
        return ToyExpandedParam(theta_star[0], self.cfg.pi)


class Runaway:
    """Model whose step doubles theta and eventually blows up."""

    def validate(self, theta):
        return np.asarray(theta, dtype=float)

    def e_step(self, theta):
        if theta[0] > 1e3:
            raise DivergenceError("runaway")
        return theta

    def m_step(self, stats):
        return 2 * stats

    px_m_step = m_step

    def cm_alpha_step(self, stats, theta_star):
        return theta_star

    def reduce(self, xp):
        return xp

    def loglik(self, theta):
        return float(theta[0])

    def null_alpha(self):
        return None


def test_stop_rule_defaults_and_validation():
    r = StopRule()
    assert (r.loglik_tol, r.param_tol, r.max_iter) == (1e-10, 1e-9, 10000)
    with pytest.raises(ValueError):
        StopRule(loglik_tol=0)
    with pytest.raises(ValueError):
        StopRule(max_iter=0)


def test_em_trace_starts_with_recursion():
    tr = run_em(TOY, [8.0])
    assert [r.theta[0] for r in tr.iterations[:4]] == [8.0, 14.0, 18.5, 21.875]
    assert tr.converged and tr.stop_reason is StopReason.TOLERANCE
    assert tr.theta[0] == pytest.approx(32.0, abs=1e-8)


def test_em_fixed_point_start_stops_immediately():
    tr = run_em(TOY, [32.0])
    assert tr.converged and tr.n_iter == 0
    assert [r.theta[0] for r in tr.iterations] == [32.0, 32.0]


@pytest.mark.parametrize("lam0", [0.01, 0.1, 1.0, 8.0, 1000.0])
@pytest.mark.parametrize("runner", [run_px_em, run_ecm])
def test_px_em_and_ecm_one_step(runner, lam0):
    tr = runner(TOY, [lam0])
    assert tr.iterations[1].theta[0] == pytest.approx(32.0, rel=1e-12)
    assert tr.n_iter == 1 and tr.converged


def test_px_em_one_step_exact():
    tr = run_px_em(EXACT, [Fraction(8)])
    assert [r.theta[0] for r in tr.iterations] == [8, 32, 32]


def test_degenerate_cm_step_reproduces_em():
    a = run_em(TOY, [8.0])
    b = run_ecm(NullAlphaToy(ToyConfig(8, 0.25)), [8.0])
    assert len(a.iterations) == len(b.iterations)
    for ra, rb in zip(a.iterations, b.iterations):
        assert ra.theta[0] == rb.theta[0] and ra.loglik == rb.loglik


@settings(max_examples=100, deadline=None)
@given(x=st.integers(1, 50), pi=st.floats(0.01, 0.99), lam=st.floats(0.01, 1e3))
def test_reduction_at_null_alpha_is_identity(x, pi, lam):
    cfg = ToyConfig(x, pi)
    assert toy_reduce(cfg, ToyExpandedParam(lam, cfg.pi)) == lam


@pytest.mark.parametrize("schedule", ["em", "ecm", "pxem"])
@pytest.mark.parametrize("lam0", [0.1, 1.0, 8.0, 100.0])
def test_toy_traces_are_monotone(schedule, lam0):
    assert run_schedule(schedule, TOY, [lam0]).is_monotone()


@pytest.mark.parametrize("lam0", [0.1, 1.0, 8.0, 100.0])
def test_px_em_step_dominates_em_step(lam0):
    em = run_em(TOY, [lam0], StopRule(max_iter=1))
    px = run_px_em(TOY, [lam0], StopRule(max_iter=1))
    assert px.iterations[1].loglik >= em.iterations[1].loglik


def test_runs_are_deterministic():
    a, b = run_em(TOY, [8.0]), run_em(TOY, [8.0])
    assert np.array_equal(a.thetas, b.thetas) and np.array_equal(a.logliks, b.logliks)


def test_unknown_schedule():
    with pytest.raises(ValueError, match="unknown schedule"):
        run_schedule("ecme", TOY, [8.0])


def test_max_iter_stop():
    tr = run_em(TOY, [8.0], StopRule(max_iter=5))
    assert tr.stop_reason is StopReason.MAX_ITER and not tr.converged
    assert tr.n_iter == 5 and len(tr.iterations) == 6


def test_divergence_stop():
    tr = run_em(Runaway(), [1.0])
    assert tr.stop_reason is StopReason.DIVERGENCE and "runaway" in tr.message
    assert tr.theta[0] == 1024.0


def test_invalid_start_is_rejected():
    with pytest.raises(PreconditionError):
        run_em(TOY, [-1.0])


def test_exact_em_rates_are_one_minus_pi():
    tr = run_em(EXACT, [Fraction(8)], StopRule(max_iter=60))
    rates = rate_diagnostics(tr, per_coordinate=True, loglik_limit=TOY.loglik([32.0]),
                             theta_limit=[Fraction(32)])
    vals = rates.theta_values(0)
    assert len(vals) == 60
    assert max(abs(v - 0.75) for v in vals) == 0.0


def test_float_em_rates_near_limit():
    tr = run_em(TOY, [8.0])
    rates = rate_diagnostics(tr, per_coordinate=True, theta_limit=[32.0])
    vals = rates.theta_values(0)
    # rounding in the iterates only matters once |lambda - 32| is tiny
    assert max(abs(v - 0.75) for v in vals[:30]) < 1e-12
    assert tail_rate(rates.loglik_values[:40]) == pytest.approx(0.5625, abs=1e-6)


def test_px_em_rates_collapse():
    tr = run_px_em(EXACT, [Fraction(8)])
    rates = rate_diagnostics(tr, per_coordinate=True, theta_limit=[Fraction(32)])
    assert rates.theta_values(0) == [0.0]


def test_rate_diagnostics_needs_three_records():
    tr = run_em(TOY, [32.0], StopRule(max_iter=1))
    tr = FitTrace(tr.iterations[:2], True, StopReason.TOLERANCE)
    with pytest.raises(PreconditionError):
        rate_diagnostics(tr)


def test_ratio_series_skips_small_denominators():
    assert ratio_series([4.0, 2.0, 1.0, 1.0], 1.0) == [(0, 1 / 3), (1, 0.0)]


def test_tail_rate():
    assert tail_rate([0.9, 0.1, 0.5, 0.6, 0.7]) == 0.6
    with pytest.raises(PreconditionError):
        tail_rate([])


def test_param_tail_rate_on_toy_em():
    assert param_tail_rate(run_em(TOY, [8.0])) == pytest.approx(0.75, abs=1e-3)


def test_csv_round_trip():
    tr = run_em(TOY, [8.0])
    buf = io.StringIO()
    write_trace_csv(tr, buf)
    buf.seek(0)
    assert buf.getvalue().splitlines()[0] == "iter,loglik,theta_1"
    it, ll, th = read_trace_csv(buf)
    assert list(it) == [r.t for r in tr.iterations]
    assert np.array_equal(ll, tr.logliks)
    assert np.array_equal(th, tr.thetas)


def test_first_within():
    recs = [IterRecord(t, np.array([0.0]), -1.0 / 10**t) for t in range(5)]
    tr = FitTrace(recs, False, StopReason.MAX_ITER)
    assert tr.first_within(0.0, 5e-3) == 3
    assert tr.first_within(0.0, 1e-9) is None
