from functools import lru_cache
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coevo import fluid
from coevo.distributions import Exponential, Tabulated, Uniform01
from coevo.errors import ConfigurationError, DegenerateThresholdError
from coevo.hilt import (HiltCounts, HiltParams, default_params, discrete_influence, make_rng,
                        run_exact, run_scaled, step_exact, step_scaled)

B_INF = 0.2 / (1 - 0.9 + 0.9 * 0.2)


def exact_expected_terminal(N, Gamma, k):
    """Expected terminal destination count by dynamic programming over (B, D)."""
    g = Gamma / (N - 1)

    @lru_cache(None)
    def E(B, D):
        S = N - B - D
        if D == 0 or S == 0:
            return B + D
        p = g * D / (1 - g * B)
        return sum(comb(S, j) * p**j * (1 - p) ** (S - j) * E(B + D, j) for j in range(S + 1))

    return E(0, k)


def test_params_validation():
    p = HiltParams(11, 0.9, Uniform01(), 3)
    assert p.gamma_N * (p.N - 1) == pytest.approx(0.9, abs=1e-12)
    assert HiltParams(1, 0.9, Uniform01(), 1).gamma_N == 0.0
    for bad in [(0, 0.5, 0), (10, 1.5, 1), (10, 0.5, 11), (10, 0.5, -1)]:
        with pytest.raises(ConfigurationError):
            HiltParams(bad[0], bad[1], Uniform01(), bad[2])


@pytest.mark.parametrize("step", [step_exact, step_scaled])
def test_zero_infectious_is_absorbing(step):
    params = HiltParams(50, 0.9, Uniform01(), 0)
    s = step(params, HiltCounts(7, 0, 3), make_rng(1))
    assert (s.B, s.D) == (7, 0)


def test_gamma_zero_no_spread():
    params = HiltParams(200, 0.0, Uniform01(), 40)
    rng = make_rng(2)
    for _ in range(20):
        s = step_exact(params, HiltCounts(0, 40), rng)
        assert (s.B, s.D) == (40, 0)


def test_exact_step_mean_first_period():
    N, k = 3000, 600
    params = HiltParams(N, 0.9, Uniform01(), k)
    p = params.gamma_N * k  # F(gamma*k) - F(0) over 1 - F(0)
    rng = make_rng(12345)
    draws = np.array([step_exact(params, HiltCounts(0, k), rng).D for _ in range(10_000)])
    mean = (N - k) * p
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - mean) < 3 * se
    assert draws.var() == pytest.approx((N - k) * p * (1 - p), rel=0.05)


def test_degenerate_threshold_raises():
    # all threshold mass below 0.5 is used up once gamma*B >= 0.5
    dist = Tabulated([0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
    params = HiltParams(10, 0.9, dist, 1)
    with pytest.raises(DegenerateThresholdError):
        step_exact(params, HiltCounts(6, 1), make_rng(0))


def test_scaled_single_node_two_outcomes():
    params = HiltParams(1, 0.9, Uniform01(), 1)
    s = step_scaled(params, HiltCounts(0, 1), make_rng(0))
    # C ~ Bernoulli(1/N) = 1 with certainty, no relays remain
    assert (s.B, s.D) == (1, 0)


def test_scaled_jump_law_two_nodes():
    # N=2, state (0,1): C ~ Bern(1/2); if C=1 the single relay converts w.p. F(gamma)=Gamma
    params = HiltParams(2, 0.6, Uniform01(), 1)
    rng = make_rng(9)
    outs = [step_scaled(params, HiltCounts(0, 1), rng) for _ in range(40_000)]
    freq = {}
    for s in outs:
        freq[(s.B, s.D)] = freq.get((s.B, s.D), 0) + 1
    want = {(0, 1): 0.5, (1, 1): 0.5 * 0.6, (1, 0): 0.5 * 0.4}
    assert set(freq) == set(want)
    for key, p in want.items():
        se = np.sqrt(p * (1 - p) / len(outs))
        assert abs(freq[key] / len(outs) - p) < 4 * se


@pytest.mark.parametrize("run, horizon", [(run_exact, 100), (run_scaled, 10.0)])
def test_run_edge_cases(run, horizon):
    empty = run(HiltParams(30, 0.9, Uniform01(), 0), horizon, make_rng(0))
    assert empty.k.size == 1 and empty.terminal_A == 0
    full = run(HiltParams(30, 0.9, Uniform01(), 30), horizon, make_rng(0))
    assert full.terminal_A == 30


def test_exact_full_seed_absorbs_in_one_period():
    path = run_exact(HiltParams(30, 0.9, Uniform01(), 30), 100, make_rng(0))
    assert path.k.size == 2 and (path.B[-1], path.D[-1]) == (30, 0)


@pytest.mark.parametrize("run, horizon", [(run_exact, 10), (run_scaled, 1.0)])
def test_horizon_must_be_positive(run, horizon):
    with pytest.raises(ConfigurationError):
        run(default_params(20), 0, make_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.floats(0, 1), st.floats(0.01, 1), st.integers(0, 2**32),
       st.booleans())
def test_trajectory_invariants(N, Gamma, d0, seed, scaled):
    params = HiltParams(N, Gamma, Uniform01(), max(1, int(d0 * N)))
    rng = make_rng(seed)
    path = run_scaled(params, 5.0, rng) if scaled else run_exact(params, 10 * N, rng)
    assert np.all(path.B + path.D <= N) and np.all(path.B >= 0) and np.all(path.D >= 0)
    assert np.all(np.diff(path.B) >= 0)
    if not scaled:
        assert np.array_equal(path.B[1:], path.A[:-1])
        assert path.D[-1] == 0


def test_exact_terminal_mean_matches_fluid():
    params = default_params(3000)
    A = [run_exact(params, 10_000, make_rng(s), seed=s).terminal_A / 3000 for s in range(100)]
    assert abs(np.mean(A) - B_INF) < 0.02


def _exact_mean_paths(N=3000, seeds=100, K=12):
    params = default_params(N)
    BD = np.zeros((seeds, K + 1, 2))
    for s in range(seeds):
        path = run_exact(params, 10_000, make_rng(s), seed=s)
        BD[s, :, 0], BD[s, :, 1] = path.fractions_at(np.arange(K + 1))
    return BD.mean(axis=0), BD.std(axis=0, ddof=1) / np.sqrt(seeds)


def test_exact_mean_trajectory_tracks_period_map():
    # deterministic per-period mean-field map of the unscaled chain
    mean, se = _exact_mean_paths()
    N, G = 3000, 0.9
    g = G / (N - 1)
    B, D = 0.0, 0.2 * N
    for k in range(mean.shape[0]):
        assert abs(mean[k, 0] - B / N) <= 3 * se[k, 0] + 1e-12
        assert abs(mean[k, 1] - D / N) <= 3 * se[k, 1] + 1e-12
        B, D = B + D, (N - B - D) * g * D / (1 - g * B)


@pytest.mark.xfail(strict=True, reason="the unscaled chain advances in periods, not ODE time")
def test_exact_mean_trajectory_vs_ode_at_integer_times():
    mean, se = _exact_mean_paths()
    b, d = fluid.hilt_closed_form_uniform(0.9, 0.2, np.arange(mean.shape[0]))
    assert np.all(np.abs(mean[:, 0] - b) <= 3 * se[:, 0])
    assert np.all(np.abs(mean[:, 1] - d) <= 3 * se[:, 1])


def test_scaled_tracks_ode_better_with_larger_N():
    from coevo.convergence import hilt_distance

    ode = fluid.solve_hilt(0.9, Uniform01(), 0.2, 10.0, 1e-2)
    med = []
    for N in (50, 1000):
        params = default_params(N)
        med.append(np.median([hilt_distance(run_scaled(params, 10.0, make_rng(s)), ode)
                              for s in range(20)]))
    assert med[1] < med[0]


def test_runs_reproducible():
    params = default_params(500)
    a = run_scaled(params, 5.0, make_rng(42), seed=42)
    b = run_scaled(params, 5.0, make_rng(42), seed=42)
    assert np.array_equal(a.B, b.B) and np.array_equal(a.D, b.D) and a.seed == 42


def test_fractions_at_holds_final_state():
    path = run_exact(default_params(100), 1000, make_rng(1))
    Bf, Df = path.fractions_at([0, 1e6])
    assert Bf[0] == 0 and Df[0] == 0.2
    assert Bf[1] == path.B[-1] / 100 and Df[1] == 0


@pytest.mark.parametrize("N, Gamma, k", [(3, 0.9, 1), (5, 0.9, 1), (10, 0.5, 2), (30, 0.9, 6),
                                          (12, 0.99, 1), (8, 0.3, 8)])
def test_discrete_influence_equals_exact_chain_expectation(N, Gamma, k):
    assert discrete_influence(N, Gamma, k) == pytest.approx(
        exact_expected_terminal(N, Gamma, k), rel=1e-12)


def test_discrete_influence_monte_carlo():
    params = HiltParams(30, 0.9, Uniform01(), 6)
    A = np.array([run_exact(params, 100, make_rng(s)).terminal_A for s in range(4000)])
    se = A.std(ddof=1) / np.sqrt(A.size)
    assert abs(A.mean() - discrete_influence(30, 0.9, 6)) < 3 * se


@pytest.mark.parametrize("N", [5, 100, 3000])
def test_discrete_influence_trivial(N):
    assert discrete_influence(N, 0.9, 0) == 0
    assert discrete_influence(N, 0.0, 3) == pytest.approx(3)


def test_discrete_influence_large_N():
    assert abs(discrete_influence(3000, 0.9, 600) / 3000 - B_INF) < 0.01


def test_discrete_influence_monotone():
    Is = [discrete_influence(60, 0.8, k) for k in range(61)]
    assert np.all(np.diff(Is) >= -1e-12)
    Gs = [discrete_influence(60, g, 5) for g in np.linspace(0, 1, 21)]
    assert np.all(np.diff(Gs) >= 0)


def test_discrete_influence_bad_k():
    with pytest.raises(ConfigurationError):
        discrete_influence(10, 0.5, 11)


def test_exponential_thresholds_run():
    params = HiltParams(400, 0.5, Exponential(2.0), 40)
    path = run_exact(params, 1000, make_rng(3))
    assert path.D[-1] == 0 and path.terminal_A >= 40
