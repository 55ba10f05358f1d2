"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with its wall time; the lines are
printed together at the end of the pytest run (see conftest.py).  Run
this file directly to execute only these checks.
"""
import math
import time

import numpy as np
import pytest

from coevo import control, convergence, fluid, hilt
from coevo.control import CoevolConfig
from coevo.distributions import Exponential, Uniform01
from coevo.fluid import CoevolFluidState, CoevolParams
from coevo.policies import Constant, PiecewiseConstant, TimeThreshold

RESULTS = []
N_LIST = [50, 100, 500, 1000]
SEEDS = list(range(20))
B_INF = 0.2 / (1 - 0.9 + 0.9 * 0.2)
# sweep base with an interior optimum
SWEEP_BASE = CoevolConfig(lam=2.0, beta=1.0, Gamma=0.5, alpha=0.8, psi=2.0, d0=0.1, xd0_ratio=0.1)
# tau* comparisons allow twice the golden-section tolerance
TAU_SLACK = 2e-4


def record(n, title, ok, elapsed, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{elapsed:.2f}s]  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_configs(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(CoevolConfig(lam=rng.uniform(1, 6), beta=rng.uniform(0.5, 2),
                                Gamma=rng.uniform(0.1, 0.9), alpha=rng.uniform(0.3, 0.9),
                                psi=rng.uniform(0.1, 5), d0=rng.uniform(0.05, 0.5),
                                xd0_ratio=rng.uniform(0.1, 0.9)))
    return out


def test_criterion_1_closed_form_fidelity():
    t0 = time.perf_counter()
    path = fluid.solve_hilt(0.9, Uniform01(), 0.2, 20.0, 1e-3)
    elapsed = time.perf_counter() - t0
    b, d = fluid.hilt_closed_form_uniform(0.9, 0.2, path.t)
    err = max(np.max(np.abs(path.b - b)), np.max(np.abs(path.d - d)))
    record(1, "RK4 vs closed form", err < 1e-6 and elapsed < 1.0, elapsed,
           f"sup error {err:.2e} (< 1e-6), runtime < 1 s")


def test_criterion_2_terminal_fraction():
    t0 = time.perf_counter()
    uni = fluid.solve_hilt(0.9, Uniform01(), 0.2, 1e6, 1e-3, until_extinct=True)
    e_uni = abs(uni.b[-1] - 0.7142857)
    # exponential thresholds: lambda_theta * Gamma = 2
    expo = fluid.solve_hilt(1.0, Exponential(2.0), 0.2, 1e6, 1e-3, until_extinct=True)
    b = 1.0
    for _ in range(5000):
        b = 1.0 - 0.8 * math.exp(-2.0 * b)
    e_exp = abs(expo.b[-1] - b)
    e_root = abs(fluid.terminal_fraction(Exponential(2.0), 1.0, 0.2) - b)
    ok = uni.d[-1] < 1e-9 and expo.d[-1] < 1e-9 and max(e_uni, e_exp, e_root) < 1e-4
    record(2, "terminal fraction", ok, time.perf_counter() - t0,
           f"uniform err {e_uni:.1e}, exponential err {e_exp:.1e} (root {b:.6f})")


def test_criterion_3_discrete_vs_fluid_gap():
    t0 = time.perf_counter()
    gaps = [abs(hilt.discrete_influence(N, 0.9, int(0.2 * N)) / N - B_INF)
            for N in (100, 1000, 3000)]
    elapsed = time.perf_counter() - t0
    ok = convergence.strictly_decreasing(gaps) and elapsed < 5.0
    record(3, "discrete-vs-fluid gap", ok, elapsed,
           "gaps " + ", ".join(f"{g:.2e}" for g in gaps))


def test_criterion_4_hilt_convergence():
    t0 = time.perf_counter()
    rows = convergence.hilt_study(N_LIST, SEEDS, 0.9, 0.2, Uniform01(), 10.0)
    elapsed = time.perf_counter() - t0
    med = [r.median for r in rows]
    ok = convergence.strictly_decreasing(med) and elapsed < 60.0
    record(4, "HILT convergence", ok, elapsed, "medians " + ", ".join(f"{m:.4f}" for m in med))


def test_criterion_5_sirsi_convergence():
    p = convergence.SIRSI_DEFAULTS
    params = CoevolParams(p["lam"], p["beta"], p["Gamma"], p["alpha"], p["psi"])
    t0 = time.perf_counter()
    parts, ok = [], True
    for label, pol in (("sigma=1", Constant(1.0)), ("sigma=0.3", Constant(0.3)),
                       ("tau=4", TimeThreshold(4.0))):
        rows = convergence.sirsi_study(N_LIST, SEEDS, params, pol, p["d0"], p["xd0"],
                                       p["horizon"])
        med = [r.median for r in rows]
        ok &= convergence.strictly_decreasing(med)
        parts.append(label + " " + "/".join(f"{m:.3f}" for m in med))
    elapsed = time.perf_counter() - t0
    record(5, "SIR-SI convergence", ok and elapsed < 300.0, elapsed, "; ".join(parts))


def test_criterion_6_monotone_comparison():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    violations, worst = 0, math.inf
    for i in range(50):
        params = CoevolParams(rng.uniform(0.5, 8), rng.uniform(0.3, 3), rng.uniform(0, 1))
        d0 = rng.uniform(0.01, 0.9)
        start = CoevolFluidState.initial(d0, d0 * rng.uniform(0, 1))
        breaks = tuple(np.sort(rng.uniform(0, 10, 3)))
        if i % 2:
            hi = rng.uniform(0, 1, 4)
            lo = hi * rng.uniform(0, 1, 4)
        else:
            # two time-threshold policies, tau_1 >= tau_2, on a shared grid
            hi, lo = (1.0, 1.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)
        a = fluid.solve_coevol(params, start, PiecewiseConstant(breaks, tuple(hi)), 12.0, 1e-2)
        b = fluid.solve_coevol(params, start, PiecewiseConstant(breaks, tuple(lo)), 12.0, 1e-2)
        margin = float(np.min(a.z[:, 2:] - b.z[:, 2:]))
        worst = min(worst, margin)
        violations += margin < -1e-7
    record(6, "monotone comparison", violations == 0, time.perf_counter() - t0,
           f"{violations} violations in 50 sets, worst margin {worst:.1e}")


def _constant_grid_min(cfg, a_inf):
    return min(control.evaluate_cost(cfg.params, cfg.initial, Constant(s), a_inf=a_inf).C
               for s in np.linspace(0, 1, 11))


def test_criterion_7_threshold_dominance():
    t0 = time.perf_counter()
    violations, worst = 0, -math.inf
    for cfg in random_configs(20, 7):
        opt = control.optimize_tau(cfg.params, cfg.initial)
        gap = opt.report.C - _constant_grid_min(cfg, opt.report.a_inf)
        worst = max(worst, gap)
        violations += gap > 1e-4
    elapsed = time.perf_counter() - t0
    record(7, "threshold dominance", violations == 0 and elapsed < 600, elapsed,
           f"{violations} violations in 20 configs, worst C_tau - C_sigma = {worst:.1e}")


def test_criterion_8_optimizer_structure():
    t0 = time.perf_counter()
    bad = []
    configs = random_configs(20, 7) + [SWEEP_BASE]
    for i, cfg in enumerate(configs):
        if not control.optimize_tau(cfg.params, cfg.initial).monotone:
            bad.append(f"grid {i}")
    opt = lambda c: control.optimize_tau(c.params, c.initial)
    if opt(SWEEP_BASE.with_value("d0", 1.0)).tau_star != 0.0:
        bad.append("tau*(d0=1)")
    if opt(SWEEP_BASE.with_value("xd0_ratio", 1.0)).tau_star != 0.0:
        bad.append("tau*(ratio=1)")
    psi = control.sweep("psi", [0.25, 0.5, 1, 2, 4, 8], SWEEP_BASE)
    if np.any(np.diff([r.tau_star for r in psi]) > TAU_SLACK):
        bad.append("tau* vs psi")
    lam = control.sweep("lambda", [1, 1.5, 2, 3, 4, 6], SWEEP_BASE)
    if np.any(np.diff([r.tau_star for r in lam]) > TAU_SLACK):
        bad.append("tau* vs lambda")
    if np.any(np.diff([r.C for r in lam]) > 0):
        bad.append("C vs lambda")
    detail = ("all grids monotone, sweep signs hold" if not bad
              else "failed: " + ", ".join(bad))
    record(8, "optimizer structure", not bad, time.perf_counter() - t0, detail)


def test_criterion_9_seed_sizing():
    t0 = time.perf_counter()
    e_target = e_fwd = e_lim = 0.0
    for G in np.linspace(0.0, 0.95, 20):
        for b in np.linspace(0.05, 1.0, 20):
            d0 = control.seed_for_target(G, b)
            e_target = max(e_target, abs(fluid.terminal_fraction(Uniform01(), G, d0) - b))
            for T in (0.5, 3.0, 15.0, 60.0):
                d0T = control.seed_for_deadline(b, G, T)
                e_fwd = max(e_fwd, abs(control.destinations_at(T, d0T, G) - b))
            e_lim = max(e_lim, abs(control.seed_for_deadline(b, G, 0.0) - b),
                        abs(control.seed_for_deadline(b, G, 1e4) - d0))
    ok = e_target < 1e-10 and e_fwd < 1e-8 and e_lim < 1e-6
    record(9, "seed sizing round trips", ok, time.perf_counter() - t0,
           f"target {e_target:.1e}, deadline {e_fwd:.1e}, limits {e_lim:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
