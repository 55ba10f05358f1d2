"""Copy-control costs, optimal time thresholds, seed sizing and parameter sweeps.

Cost of a policy: ``C = T + psi * y(T)`` where ``T`` is the first time the
fraction of destinations holding the content reaches ``alpha * a(inf)``
and ``y(T)`` is the fraction of relays holding a (wasted) copy then.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fluid
from ._parallel import pmap
from .errors import CoevoError, ConfigurationError, DomainError, UnreachableTargetError
from .fluid import CoevolFluidState, CoevolParams, bisect
from .policies import Constant, CopyPolicy, TimeThreshold

log = logging.getLogger(__name__)

PHI = (math.sqrt(5.0) - 1.0) / 2.0
#: slack allowed when checking monotonicity of T_tau and y_tau(T_tau) on a grid
MONOTONE_SLACK = 1e-9
#: costs this close count as tied; ties go to the smaller tau
TIE_TOL = 1e-9


@dataclass(frozen=True)
class CostReport:
    policy: dict
    T: float
    y_T: float
    C: float
    status: str = "ok"
    a_inf: float = math.nan

    @property
    def reached(self):
        return self.status == "ok"


def evaluate_cost(params: CoevolParams, initial, policy: CopyPolicy, *, a_inf=None,
                  horizon=None, h=fluid.DEFAULT_STEP) -> CostReport:
    """Integrate the controlled ODE up to the target time and price the policy.

    A target not met by ``horizon`` yields ``status='not-reached'`` with
    infinite ``T`` and ``C``; it is not an exception.
    """
    st = fluid._as_state(initial)
    if a_inf is None:
        a_inf = fluid.terminal_destinations(params, st, h)
    desc = policy.describe()
    target = params.alpha * a_inf
    x0 = st.x_b + st.x_d
    if x0 < target and x0 + st.y == 0.0:
        # no copy of the content exists anywhere
        return CostReport(desc, math.inf, math.nan, math.inf, "not-reached", a_inf)
    path = fluid.solve_coevol(params, st, policy, horizon, h, stop_at_x=target)
    T, z_T = fluid.crossing(path, params, target)
    if not math.isfinite(T):
        return CostReport(desc, math.inf, math.nan, math.inf, "not-reached", a_inf)
    y_T = max(float(z_T[4]), 0.0)
    return CostReport(desc, T, y_T, T + params.psi * y_T, "ok", a_inf)


def golden_section(f, lo, hi, tol=1e-4, maxiter=200):
    """Minimise a scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    x1 = b - PHI * (b - a)
    x2 = a + PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(maxiter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


@dataclass
class TauOptimum:
    tau_star: float
    report: CostReport
    tau_sat: float
    taus: np.ndarray = field(repr=False)
    grid: list = field(repr=False)
    monotone: bool = True

    @property
    def T(self):
        return np.array([r.T for r in self.grid])

    @property
    def y(self):
        return np.array([r.y_T for r in self.grid])

    @property
    def C(self):
        return np.array([r.C for r in self.grid])


def grid_is_monotone(T, y, slack=MONOTONE_SLACK):
    """T nonincreasing and y nondecreasing along an increasing tau grid."""
    return bool(np.all(np.diff(T) <= slack) and np.all(np.diff(y) >= -slack))


def optimize_tau(params: CoevolParams, initial, *, n_grid=64, tol=1e-4, horizon=None,
                 h=fluid.DEFAULT_STEP) -> TauOptimum:
    """Best copy-until-``tau`` policy.

    Thresholds beyond ``tau_sat`` (the target time under full copying)
    all behave like full copying, so only ``[0, tau_sat]`` is searched: a
    grid of ``n_grid`` points, then golden-section refinement around the
    best grid point.  Ties go to the smaller ``tau``.
    """
    st = fluid._as_state(initial)
    a_inf = fluid.terminal_destinations(params, st, h)
    cache = {}

    def cost(tau):
        if tau not in cache:
            cache[tau] = evaluate_cost(params, st, TimeThreshold(tau), a_inf=a_inf,
                                       horizon=horizon, h=h)
        return cache[tau]

    full = evaluate_cost(params, st, Constant(1.0), a_inf=a_inf, horizon=horizon, h=h)
    if not full.reached:
        rep = replace(full, policy=TimeThreshold(0.0).describe())
        return TauOptimum(math.nan, rep, math.nan, np.array([]), [], True)
    tau_sat = full.T
    if tau_sat == 0.0:
        rep = cost(0.0)
        return TauOptimum(0.0, rep, 0.0, np.array([0.0]), [rep], True)

    taus = np.linspace(0.0, tau_sat, n_grid)
    grid = [cost(float(t)) for t in taus]
    Cs = np.array([r.C for r in grid])
    monotone = grid_is_monotone(np.array([r.T for r in grid]), np.array([r.y_T for r in grid]))
    if not monotone:
        log.warning("T_tau / y_tau(T_tau) not monotone on the tau grid for %s", params)
    i = int(np.flatnonzero(Cs <= Cs.min() + TIE_TOL)[0])
    best_tau, best = float(taus[i]), grid[i]
    lo, hi = float(taus[max(i - 1, 0)]), float(taus[min(i + 1, n_grid - 1)])
    x, fx = golden_section(lambda t: cost(t).C, lo, hi, tol)
    if fx < best.C - TIE_TOL:
        best_tau, best = x, cost(x)
    return TauOptimum(best_tau, best, tau_sat, taus, grid, monotone)


# --------------------------------------------------------------------------
# interest evolution alone (uniform thresholds)


def seed_for_target(Gamma, b_inf_target):
    """Initial destination fraction whose fluid limit ends at ``b_inf_target``.

    With ``Gamma == 1`` any positive seed converts everyone; the infimum 0
    is returned for targets below 1 (and 1 only needs ``d0 > 0`` as well).
    """
    if not 0.0 <= b_inf_target <= 1.0:
        raise DomainError(f"target fraction must lie in [0, 1], got {b_inf_target!r}")
    if not 0.0 <= Gamma <= 1.0:
        raise DomainError(f"Gamma must lie in [0, 1], got {Gamma!r}")
    if Gamma == 1.0:
        return 0.0
    return b_inf_target * (1.0 - Gamma) / (1.0 - b_inf_target * Gamma)


def destinations_at(T, d0, Gamma):
    """``a(T) = b(T) + d(T)`` of the uniform-threshold fluid limit."""
    r = 1.0 - Gamma + Gamma * d0
    if r == 0.0:
        return 0.0
    return d0 * (1.0 / r - (1.0 / r - 1.0) * math.exp(-r * T))


def waiting_time(beta_target, d0, Gamma):
    """Time until the destination fraction reaches ``beta_target``.

    Raises :class:`UnreachableTargetError` unless ``beta_target < d0 / r``.
    """
    if beta_target <= d0:
        return 0.0
    r = 1.0 - Gamma + Gamma * d0
    if r == 0.0 or beta_target >= d0 / r:
        limit = d0 / r if r else 0.0
        raise UnreachableTargetError(
            f"target {beta_target!r} not below the terminal fraction {limit!r}")
    return math.log((1.0 - r) / (1.0 - beta_target / d0 * r)) / r


def seed_for_deadline(beta_target, Gamma, T, tol=1e-12):
    """Smallest seed fraction with ``a(T) >= beta_target``, by bisection.

    ``a(T)`` is increasing in ``d0``; the root lies between the
    infinite-horizon seed and 1.
    """
    if not 0.0 < beta_target <= 1.0:
        raise DomainError(f"target fraction must lie in (0, 1], got {beta_target!r}")
    if not 0.0 <= Gamma < 1.0:
        raise DomainError(f"need 0 <= Gamma < 1, got {Gamma!r}")
    if T < 0:
        raise DomainError(f"deadline must be nonnegative, got {T!r}")
    lo = seed_for_target(Gamma, beta_target)
    if T == 0.0:
        return beta_target
    if math.isinf(T) or lo >= 1.0:
        return lo
    f = lambda d0: destinations_at(T, d0, Gamma) - beta_target
    # a(T) <= a(inf), so f(lo) > 0 is rounding: the infinite-horizon seed already suffices
    if f(lo) >= 0.0:
        return lo
    return bisect(f, lo, 1.0, tol)


# --------------------------------------------------------------------------
# sweeps

SWEEP_PARAMS = ("d0", "xd0_ratio", "Gamma", "beta", "lambda", "alpha", "psi")


@dataclass(frozen=True)
class CoevolConfig:
    """Everything needed to price and optimise copy control for one setting."""

    lam: float
    beta: float
    Gamma: float
    alpha: float
    psi: float
    d0: float
    xd0_ratio: float
    horizon: float | None = None
    h: float = fluid.DEFAULT_STEP

    def __post_init__(self):
        if not 0.0 <= self.d0 <= 1.0:
            raise ConfigurationError(f"d0 must lie in [0, 1], got {self.d0!r}")
        if not 0.0 <= self.xd0_ratio <= 1.0:
            raise ConfigurationError(f"xd0_ratio must lie in [0, 1], got {self.xd0_ratio!r}")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        if not self.h > 0:
            raise ConfigurationError("h must be positive")
        self.params  # validates the rest

    @property
    def params(self):
        return CoevolParams(self.lam, self.beta, self.Gamma, self.alpha, self.psi)

    @property
    def initial(self):
        return CoevolFluidState.initial(self.d0, self.d0 * self.xd0_ratio)

    def with_value(self, name, value):
        key = "lam" if name == "lambda" else name
        if key not in self.__dataclass_fields__:
            raise ConfigurationError(f"unknown parameter {name!r}")
        return replace(self, **{key: float(value)})

    def to_dict(self):
        return {"lambda": self.lam, "beta": self.beta, "Gamma": self.Gamma, "alpha": self.alpha,
                "psi": self.psi, "d0": self.d0, "xd0_ratio": self.xd0_ratio,
                "horizon": self.horizon, "h": self.h}


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    tau_star: float
    T: float
    y_T: float
    C: float
    status: str


def _sweep_point(args):
    param, value, base = args
    try:
        cfg = base.with_value(param, value)
        opt = optimize_tau(cfg.params, cfg.initial, horizon=cfg.horizon, h=cfg.h)
        r = opt.report
        return SweepRow(param, float(value), opt.tau_star, r.T, r.y_T, r.C, r.status)
    except CoevoError as exc:
        return SweepRow(param, float(value), math.nan, math.nan, math.nan, math.nan,
                        f"error: {exc}")


def sweep(param: str, values, base: CoevolConfig, jobs=1):
    """Optimal threshold and cost at every grid value of one parameter.

    Failures at a grid point are recorded in ``status`` and the sweep goes on.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigurationError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")
    return pmap(_sweep_point, [(param, v, base) for v in values], jobs)
