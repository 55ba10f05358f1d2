"""Stochastic HILT influence spread on the complete graph.

Two chains are provided.  The exact chain advances one influence period per
step: every infectious destination exerts its influence at once and then
turns non-infectious.  The scaled chain runs on minislots of length 1/N in
which each infectious destination uses its influence with probability 1/N;
this is the chain whose fraction process converges to the fluid ODE.

Random numbers come from numpy's ``Generator`` over PCG64, whose binomial
sampler is exact (inversion for small means, BTPE rejection otherwise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import ThresholdDistribution, Uniform01
from .errors import ConfigurationError, DegenerateThresholdError


def make_rng(seed: int) -> np.random.Generator:
    """The toolkit's seeded generator: PCG64 with a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class HiltParams:
    N: int
    Gamma: float
    dist: ThresholdDistribution
    d0_count: int

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError(f"N must be positive, got {self.N!r}")
        if not 0.0 <= self.Gamma <= 1.0:
            raise ConfigurationError(f"Gamma must lie in [0, 1], got {self.Gamma!r}")
        if not 0 <= self.d0_count <= self.N:
            raise ConfigurationError(f"d0_count must lie in [0, N], got {self.d0_count!r}")

    @property
    def gamma_N(self) -> float:
        # a single node has no neighbours to influence
        return self.Gamma / (self.N - 1) if self.N > 1 else 0.0


@dataclass(frozen=True)
class HiltCounts:
    B: int
    D: int
    k: int = 0

    @property
    def A(self):
        return self.B + self.D


def _conversion_prob(dist, gamma, B, C):
    """P(a relay whose threshold exceeds gamma*B falls below gamma*(B+C))."""
    if C == 0:
        return 0.0
    F0 = dist.cdf(gamma * B)
    if F0 >= 1.0:
        raise DegenerateThresholdError(f"F(gamma*B)={F0!r} at B={B}: no threshold mass left")
    p = (dist.cdf(gamma * (B + C)) - F0) / (1.0 - F0)
    return min(max(p, 0.0), 1.0)


def step_exact(params: HiltParams, state: HiltCounts, rng) -> HiltCounts:
    """One influence period: ``B' = B + D`` and ``D' ~ Bin(N - B - D, p(B, D))``."""
    B, D = state.B, state.D
    relays = params.N - B - D
    if D == 0 or relays == 0:
        return HiltCounts(B + D, 0, state.k + 1)
    p = _conversion_prob(params.dist, params.gamma_N, B, D)
    return HiltCounts(B + D, int(rng.binomial(relays, p)), state.k + 1)


def step_scaled(params: HiltParams, state: HiltCounts, rng) -> HiltCounts:
    """One minislot of the 1/N-thinned chain."""
    B, D, N = state.B, state.D, params.N
    if D == 0:
        return HiltCounts(B, D, state.k + 1)
    C = int(rng.binomial(D, 1.0 / N))
    relays = N - B - D
    new = 0
    if C and relays:
        new = int(rng.binomial(relays, _conversion_prob(params.dist, params.gamma_N, B, C)))
    return HiltCounts(B + C, D - C + new, state.k + 1)


@dataclass
class HiltPath:
    """Recorded chain: ``k`` counts periods (exact) or minislots (scaled)."""

    k: np.ndarray
    B: np.ndarray
    D: np.ndarray
    N: int
    seed: int | None = None
    scaled: bool = False

    @property
    def A(self):
        return self.B + self.D

    @property
    def terminal_A(self):
        return int(self.A[-1])

    def fractions_at(self, t):
        """``(B/N, D/N)`` at minislot ``floor(N t)`` (scaled) or period ``floor(t)``.

        Past the recorded end the final, absorbed state is held.
        """
        t = np.asarray(t, dtype=float)
        idx = np.floor(t * self.N if self.scaled else t).astype(np.int64)
        idx = np.clip(np.searchsorted(self.k, idx, side="right") - 1, 0, self.k.size - 1)
        return self.B[idx] / self.N, self.D[idx] / self.N


def _run(step, params, horizon, rng, seed, scaled):
    state = HiltCounts(0, params.d0_count, 0)
    ks, Bs, Ds = [0], [state.B], [state.D]
    while state.D > 0 and state.k < horizon:
        state = step(params, state, rng)
        ks.append(state.k)
        Bs.append(state.B)
        Ds.append(state.D)
    return HiltPath(np.array(ks), np.array(Bs), np.array(Ds), params.N, seed, scaled)


def run_exact(params: HiltParams, horizon: int, rng, seed=None) -> HiltPath:
    """Run the exact chain until no infectious destinations remain or ``horizon`` periods."""
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    return _run(step_exact, params, horizon, rng, seed, scaled=False)


def run_scaled(params: HiltParams, horizon: float, rng, seed=None) -> HiltPath:
    """Run the scaled chain for ``horizon`` units of fluid time (``N*horizon`` minislots)."""
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    return _run(step_scaled, params, int(math.floor(params.N * horizon)), rng, seed, scaled=True)


def discrete_influence(N: int, Gamma: float, k: int) -> float:
    """Expected terminal destination count from a seed of ``k`` nodes.

    Uniform thresholds on the complete graph with edge weight
    ``Gamma/(N-1)``::

        I(k) = k[1 + (N-k)g[1 + (N-k-1)g[ ... [1 + 1*g] ... ]]]

    evaluated from the innermost bracket (coefficient 1) outwards.
    """
    if not 0 <= k <= N:
        raise ConfigurationError(f"need 0 <= k <= N, got k={k!r}, N={N!r}")
    g = Gamma / (N - 1) if N > 1 else 0.0
    acc = 1.0
    for c in range(1, N - k + 1):
        acc = 1.0 + c * g * acc
    return k * acc


def default_params(N, Gamma=0.9, d0=0.2, dist=None) -> HiltParams:
    return HiltParams(N, Gamma, dist or Uniform01(), int(round(d0 * N)))
