"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from pxem import special
from pxem.engine import StopRule, rate_diagnostics, run_ecm, run_em, run_px_em, tail_rate
from pxem.robit import (
    ReductionVariant,
    RobitData,
    RobitExpandedParam,
    RobitModel,
    robit_e_step,
    robit_loglik,
    robit_reduce,
)
from pxem.toy import (
    ToyConfig,
    ToyExpandedParam,
    ToyModel,
    toy_e_step,
    toy_efficient_da,
    toy_expanded_e_step,
    toy_loglik,
    toy_m_step,
    toy_px_m_step,
    toy_reduce,
    toy_surface_grid,
)

from oracles import robit_expanded_prob, robit_truncated_moments

TIGHT = StopRule(loglik_tol=1e-13, param_tol=1e-12, max_iter=200000)
RUNNERS = {"em": run_em, "ecm": run_ecm, "pxem": run_px_em}

RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def finney_fits(finney):
    """Tight fits on the vaso-constriction data, nu = 2, from beta = 0."""
    fits = {}
    for sched, runner in RUNNERS.items():
        for v in ReductionVariant:
            fits[sched, v] = runner(RobitModel(finney, v), np.zeros(3), TIGHT)
    return fits


def test_criterion_01_toy_em_rate():
    # toy steps are rational maps, so exact arithmetic removes rounding from the rates
    model = ToyModel(ToyConfig(8, Fraction(1, 4)))
    trace = run_em(model, [Fraction(8)], StopRule(max_iter=200))
    rates = rate_diagnostics(trace, per_coordinate=True, loglik_limit=toy_loglik(ToyConfig(8, 0.25), 32.0),
                             theta_limit=[Fraction(32)]).theta_values(0)
    worst = max(abs(r - 0.75) for r in rates)
    # the float fit reaches the same limit
    float_fit = run_em(ToyModel(ToyConfig(8, 0.25)), [8.0])
    ok = len(rates) == len(trace.iterations) - 1 and worst < 1e-12 and abs(float_fit.theta[0] - 32.0) < 1e-8
    report(1, ok, f"{len(rates)} rates, max |rate - 0.75| = {worst:.1e}; float limit {float_fit.theta[0]:.12g}")


def test_criterion_02_toy_px_em_one_step():
    model = ToyModel(ToyConfig(8, 0.25))
    results = []
    for lam0 in (0.01, 0.1, 1.0, 8.0, 1000.0):
        tr = run_px_em(model, [lam0])
        results.append((lam0, tr.n_iter, tr.iterations[1].theta[0]))
    ok = all(n == 1 and abs(lam - 32.0) <= 1e-12 * 32 for _, n, lam in results)
    report(2, ok, "; ".join(f"{l0:g} -> {lam:.15g} in {n}" for l0, n, lam in results))


def test_criterion_03_efficient_da():
    cfg = ToyConfig(8, 0.25)
    xp = toy_efficient_da(cfg, 8.0)
    level_set = abs(xp.alpha * xp.lambda_star - 8.0 * 0.25)
    imputes = abs(toy_expanded_e_step(cfg, xp) - 32.0)
    em_step = toy_m_step(cfg, toy_expanded_e_step(cfg, xp))
    px_step = toy_reduce(cfg, toy_px_m_step(cfg, toy_e_step(cfg, 8.0)))
    exact_cfg = ToyConfig(8, Fraction(1, 4))
    exact = toy_efficient_da(exact_cfg, Fraction(8))
    exact_em = toy_m_step(exact_cfg, toy_expanded_e_step(exact_cfg, exact))
    exact_px = toy_reduce(exact_cfg, toy_px_m_step(exact_cfg, toy_e_step(exact_cfg, Fraction(8))))
    ok = (abs(xp.lambda_star - 26) < 1e-12 and abs(xp.alpha - 1 / 13) < 1e-12
          and level_set < 1e-12 and imputes < 1e-12 and em_step == px_step
          and (exact.lambda_star, exact.alpha) == (26, Fraction(1, 13)) and exact_em == exact_px == 32)
    report(3, ok, f"(lambda*, alpha) = ({xp.lambda_star:.15g}, {xp.alpha:.15g}), residuals "
                  f"{level_set:.1e}/{imputes:.1e}, EM step {em_step!r} vs PX-EM step {px_step!r}")


def test_criterion_04_robit_e_step_oracle(rng):
    start = time.perf_counter()
    worst, cells = 0.0, 0
    for nu in (2.0, 7.0):
        for y in (0, 1):
            for eta in (-2.0, -0.5, 0.0, 0.5, 2.0):
                s = robit_e_step(RobitData([[1.0]], [y], nu), [eta])
                tau, tau_z = s.tau_hat[0], s.tau_hat[0] * s.z_hat[0]
                mc = robit_truncated_moments(y, eta, nu, 1_000_000, rng)
                for value, (mean, se) in ((tau, mc["tau"]), (tau_z, mc["tau_z"])):
                    worst = max(worst, abs(value - mean) / se)
                cells += 1
    elapsed = time.perf_counter() - start
    ok = cells == 20 and worst < 3.0 and elapsed < 120
    report(4, ok, f"{cells} cells, 1e6 accepted draws each, max |z| = {worst:.2f} SE, {elapsed:.1f} s")


def test_criterion_05_monotone(finney_fits):
    bad = [f"{s}/{v.value}" for (s, v), tr in finney_fits.items() if not tr.is_monotone(1e-10)]
    ok = not bad and len(finney_fits) == 9
    report(5, ok, f"{len(finney_fits)} schedule/reduction traces, non-monotone: {bad or 'none'}")


def test_criterion_06_px_em_beats_em(finney_fits):
    em = finney_fits["em", ReductionVariant.CORRECT]
    px = finney_fits["pxem", ReductionVariant.CORRECT]
    limit = max(em.loglik, px.loglik)
    t_em, t_px = em.first_within(limit, 1e-8), px.first_within(limit, 1e-8)
    # ignore ratios once the gap is near the rounding level of the log-likelihood
    r_em = tail_rate(rate_diagnostics(em, loglik_limit=limit, floor=1e-10).loglik_values)
    r_px = tail_rate(rate_diagnostics(px, loglik_limit=limit, floor=1e-10).loglik_values)
    ok = t_em is not None and t_px is not None and t_px < t_em and r_px < r_em
    report(6, ok, f"iterations to 1e-8: PX-EM {t_px} vs EM {t_em}; tail loglik rate "
                  f"PX-EM {r_px:.4f} vs EM {r_em:.4f}")


def fd_gradient(d, beta, h=1e-5):
    g = np.empty_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (robit_loglik(d, beta + e) - robit_loglik(d, beta - e)) / (2 * h)
    return g


def test_criterion_07_common_fixed_point(finney, finney_fits):
    ref = finney_fits["pxem", ReductionVariant.CORRECT].theta
    spread = max(float(np.max(np.abs(tr.theta - ref))) for tr in finney_fits.values())
    grad = max(float(np.max(np.abs(fd_gradient(finney, tr.theta)))) for tr in finney_fits.values())
    converged = all(tr.converged for tr in finney_fits.values())
    ok = converged and spread < 1e-6 and grad < 1e-6
    report(7, ok, f"beta = {np.array2string(ref, precision=6)}, max spread {spread:.1e}, "
                  f"max |FD gradient| {grad:.1e}")


def test_criterion_08_special_functions():
    xs = np.concatenate([-np.geomspace(1e-3, 1e3, 40), [0.0], np.geomspace(1e-3, 1e3, 40)])
    nus = (0.5, 1.0, 2.0, 3.5, 7.0, 30.0, 200.0)
    sym = max(abs(special.t_cdf(x, nu) - (1 - special.t_cdf(-x, nu))) for x in xs for nu in nus)
    comp = max(abs(special.t_cdf(x, nu) + special.t_sf(x, nu) - 1) for x in xs for nu in nus)
    c1 = abs(special.t_cdf(1.0, 1.0) - 0.75)
    c2 = abs(special.t_cdf(1.0, 2.0) - (0.5 + 0.5 / math.sqrt(3)))
    c2_printed = abs(special.t_cdf(1.0, 2.0) - 0.78867513)
    fd = 0.0
    for nu in nus:
        for x in np.linspace(-6, 6, 25):
            # difference the smaller tail so 1 - F does not cancel
            h = 1e-5 * max(1.0, abs(x))
            if x > 0:
                deriv = (special.t_sf(x - h, nu) - special.t_sf(x + h, nu)) / (2 * h)
            else:
                deriv = (special.t_cdf(x + h, nu) - special.t_cdf(x - h, nu)) / (2 * h)
            fd = max(fd, abs(deriv - special.t_pdf(x, nu)) / special.t_pdf(x, nu))
    ok = sym < 1e-12 and comp < 1e-12 and c1 < 1e-10 and c2 < 1e-10 and c2_printed < 1e-8 and fd < 1e-6
    report(8, ok, f"symmetry {sym:.1e}, complement {comp:.1e}, nu=1 {c1:.1e}, nu=2 {c2:.1e}, "
                  f"FD rel {fd:.1e}")


def test_criterion_09_preservation(finney, rng):
    worst = 0.0
    for _ in range(5):
        x_row = finney.x[rng.integers(finney.n)]
        beta_star = rng.normal(0, 1, size=3)
        alpha, sigma = rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0)
        p_mc, se = robit_expanded_prob(x_row, beta_star, alpha, sigma, finney.nu, 1_000_000, rng)
        beta = robit_reduce(RobitExpandedParam(beta_star, alpha, sigma), ReductionVariant.CORRECT)
        worst = max(worst, abs(p_mc - special.t_cdf(float(x_row @ beta), finney.nu)) / se)
    report(9, worst < 3.0, f"5 random expanded parameters, 1e6 draws each, max |z| = {worst:.2f} SE")


def test_criterion_10_surface():
    cfg = ToyConfig(8, 0.25)
    rows = toy_surface_grid(cfg, 8.0)
    mismatch = sum(r.L_star != toy_loglik(cfg, toy_reduce(cfg, ToyExpandedParam(r.lambda_star, r.alpha))) for r in rows)
    lam = sorted({r.lambda_star for r in rows})
    alp = sorted({r.alpha for r in rows})
    i = max(k for k, v in enumerate(lam) if v <= 14.0)
    j = max(k for k, v in enumerate(alp) if v <= 4 / 7)
    corners = {(lam[a], alp[b]) for a in (i, i + 1) for b in (j, j + 1)}
    best = max(rows, key=lambda r: r.Q)
    ok = mismatch == 0 and (best.lambda_star, best.alpha) in corners
    report(10, ok, f"{len(rows)} rows, {mismatch} with L* != L(R); Q argmax ({best.lambda_star:.4f}, "
                   f"{best.alpha:.2f}) in cell [{lam[i]:.4f}, {lam[i + 1]:.4f}] x [{alp[j]:.2f}, {alp[j + 1]:.2f}]")
