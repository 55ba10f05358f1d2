"""Finite-N SIR-SI co-evolution as a continuous-time Markov chain.

State ``(B, D, X_b, X_d, Y)``: non-infectious and infectious destinations,
the destinations among them holding the content, and relays holding the
content.  Pairs meet at rate ``lam/N`` each and infectious destinations
recover at rate ``beta``.  Only the nine epoch types below change the state;
rates depend on counts alone, so the direct method works on aggregated rows.
When an infectious destination with the content meets a contentless relay,
influence is attempted before copying.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, CoevoError
from .fluid import CoevolParams
from .policies import CopyPolicy


@dataclass(frozen=True)
class EventRow:
    kind: str
    rate: str
    update: str


EVENT_ROWS = (
    EventRow("D-Xd recovers", "beta (D - Xd)", "(1,-1,0,0,0)"),
    EventRow("Xd recovers", "beta Xd", "(1,-1,1,-1,0)"),
    EventRow("B-Xb meets X+Y", "lam_N (B - Xb)(X + Y)", "(0,0,1,0,0)"),
    EventRow("D-Xd meets Y", "lam_N (D - Xd) Y", "(0,0,0,1,0), plus (0,1,0,1,-1) w.p. Gamma"),
    EventRow("D-Xd meets X", "lam_N (D - Xd) X", "(0,0,0,1,0)"),
    EventRow("Xd meets Y", "lam_N Xd Y", "(0,1,0,1,-1) w.p. Gamma"),
    EventRow("S-Y meets Xb+Y", "lam_N (Xb + Y)(S - Y)", "(0,0,0,0,1) w.p. sigma"),
    EventRow("S-Y meets D-Xd", "lam_N (D - Xd)(S - Y)", "(0,1,0,0,0) w.p. Gamma"),
    EventRow("S-Y meets Xd", "lam_N Xd (S - Y)",
             "(0,1,0,1,0) w.p. Gamma, else (0,0,0,0,1) w.p. sigma"),
)
KINDS = tuple(r.kind for r in EVENT_ROWS)


class AbsorbedError(CoevoError):
    """No epoch has positive rate: the chain is in an absorbing state."""


@dataclass(frozen=True)
class CoevolCounts:
    B: int
    D: int
    X_b: int
    X_d: int
    Y: int
    N: int
    t: float = 0.0

    @property
    def S(self):
        return self.N - self.B - self.D

    @property
    def X(self):
        return self.X_b + self.X_d

    def check(self):
        if min(self.B, self.D, self.X_b, self.X_d, self.Y) < 0 or self.S < 0:
            raise CoevoError(f"negative count in {self}")
        if self.X_b > self.B or self.X_d > self.D or self.Y > self.S:
            raise CoevoError(f"content holders exceed their class in {self}")

    @classmethod
    def initial(cls, N, d0_count, xd0_count=0):
        state = cls(0, d0_count, 0, xd0_count, 0, N)
        state.check()
        return state

    def as_tuple(self):
        return (self.B, self.D, self.X_b, self.X_d, self.Y)


def row_rates(B, D, Xb, Xd, Y, N, lam, beta):
    """Rates of the nine epoch types, in ``EVENT_ROWS`` order."""
    lN = lam / N
    S = N - B - D
    X = Xb + Xd
    Dc = D - Xd
    Sc = S - Y
    return [
        beta * Dc,
        beta * Xd,
        lN * (B - Xb) * (X + Y),
        lN * Dc * Y,
        lN * Dc * X,
        lN * Xd * Y,
        lN * (Xb + Y) * Sc,
        lN * Dc * Sc,
        lN * Xd * Sc,
    ]


def apply_row(row, B, D, Xb, Xd, Y, Gamma, sigma, u):
    """State after an epoch of type ``row``; ``u`` is a uniform for the coin flips."""
    if row == 0:
        return B + 1, D - 1, Xb, Xd, Y
    if row == 1:
        return B + 1, D - 1, Xb + 1, Xd - 1, Y
    if row == 2:
        return B, D, Xb + 1, Xd, Y
    if row == 3:
        if u < Gamma:
            return B, D + 1, Xb, Xd + 2, Y - 1
        return B, D, Xb, Xd + 1, Y
    if row == 4:
        return B, D, Xb, Xd + 1, Y
    if row == 5:
        if u < Gamma:
            return B, D + 1, Xb, Xd + 1, Y - 1
        return B, D, Xb, Xd, Y
    if row == 6:
        if u < sigma:
            return B, D, Xb, Xd, Y + 1
        return B, D, Xb, Xd, Y
    if row == 7:
        if u < Gamma:
            return B, D + 1, Xb, Xd, Y
        return B, D, Xb, Xd, Y
    if row == 8:
        if u < Gamma:
            return B, D + 1, Xb, Xd + 1, Y
        if u < Gamma + (1.0 - Gamma) * sigma:
            return B, D, Xb, Xd, Y + 1
        return B, D, Xb, Xd, Y
    raise ValueError(f"no epoch type {row!r}")


def _pick(rates, total, u):
    acc = 0.0
    target = u * total
    last = 0
    for i, r in enumerate(rates):
        if r > 0.0:
            acc += r
            last = i
            if target < acc:
                return i
    return last


class _Uniforms:
    """Block-buffered uniforms from a numpy Generator."""

    def __init__(self, rng, block=4096):
        self.rng = rng
        self.block = block
        self.buf = rng.random(block)
        self.i = 0

    def __call__(self):
        if self.i == self.block:
            self.buf = self.rng.random(self.block)
            self.i = 0
        u = self.buf[self.i]
        self.i += 1
        return u


def gillespie_step(state: CoevolCounts, params: CoevolParams, policy: CopyPolicy, rng):
    """One jump of the chain; returns ``(new_state, row_index)``.

    The coin flips are resolved with ``sigma`` evaluated at the jump time.
    """
    B, D, Xb, Xd, Y = state.as_tuple()
    rates = row_rates(B, D, Xb, Xd, Y, state.N, params.lam, params.beta)
    total = sum(rates)
    if total <= 0.0:
        raise AbsorbedError(f"total rate 0 at {state}")
    t = state.t - math.log(1.0 - rng.random()) / total
    row = _pick(rates, total, rng.random())
    new = apply_row(row, B, D, Xb, Xd, Y, params.Gamma, policy.value(t), rng.random())
    return CoevolCounts(*new, state.N, t), row


@dataclass
class CtmcPath:
    """Event-time record of one run; row ``i`` holds the state after epoch ``i``."""

    t: np.ndarray
    kind: np.ndarray
    counts: np.ndarray
    N: int
    seed: int | None
    T_hit: float
    Y_at_T: float
    absorbed: bool

    def fractions_at(self, t):
        """Scaled state ``Z(t)/N`` of the piecewise-constant path at times ``t``."""
        idx = np.searchsorted(self.t, np.asarray(t, dtype=float), side="right") - 1
        return self.counts[np.clip(idx, 0, None)] / self.N

    def event_rows(self):
        for t, k, c in zip(self.t, self.kind, self.counts):
            yield (self.seed, float(t), KINDS[k] if k >= 0 else "initial", *map(int, c))


def run_ctmc(initial: CoevolCounts, params: CoevolParams, policy: CopyPolicy, horizon: float,
             rng, *, a_inf=None, seed=None, check=False) -> CtmcPath:
    """Simulate from ``initial`` until absorption or ``horizon``.

    ``a_inf`` (the fluid terminal destination fraction) defines the
    empirical target: the first time ``X >= alpha * a_inf * N``.  Holding
    times that straddle a policy breakpoint are redrawn from the breakpoint,
    which leaves the law unchanged because rates do not depend on sigma.
    """
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    initial.check()
    N = initial.N
    lam, beta, G = params.lam, params.beta, params.Gamma
    uni = _Uniforms(rng)
    breaks = [b for b in policy.breakpoints if b > initial.t]
    bi = 0
    target = None if a_inf is None else params.alpha * a_inf * N

    t = initial.t
    B, D, Xb, Xd, Y = initial.as_tuple()
    ts, kinds, states = [t], [-1], [(B, D, Xb, Xd, Y)]
    T_hit, Y_at = math.inf, math.nan
    if target is not None and Xb + Xd >= target:
        T_hit, Y_at = t, Y / N
    absorbed = False
    while True:
        rates = row_rates(B, D, Xb, Xd, Y, N, lam, beta)
        total = sum(rates)
        if total <= 0.0:
            absorbed = True
            break
        tn = t - math.log(1.0 - uni()) / total
        if bi < len(breaks) and breaks[bi] < tn and breaks[bi] <= horizon:
            t = breaks[bi]
            bi += 1
            continue
        if tn > horizon:
            break
        t = tn
        row = _pick(rates, total, uni())
        B, D, Xb, Xd, Y = apply_row(row, B, D, Xb, Xd, Y, G, policy.value(t), uni())
        if check:
            CoevolCounts(B, D, Xb, Xd, Y, N, t).check()
        ts.append(t)
        kinds.append(row)
        states.append((B, D, Xb, Xd, Y))
        if T_hit == math.inf and target is not None and Xb + Xd >= target:
            T_hit, Y_at = t, Y / N
    return CtmcPath(np.array(ts), np.array(kinds), np.array(states, dtype=np.int64), N, seed,
                    T_hit, Y_at, absorbed)
