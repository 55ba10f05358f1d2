"""Deterministic fluid limits: the HILT interest ODE and the controlled SIR-SI ODE.

All integration is classical fixed-step RK4.  Policy breakpoints are
inserted into the time grid so that a copy-control switch never falls
inside a step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .distributions import Exponential, ThresholdDistribution, Uniform01
from .errors import ConfigurationError, IntegrationError, NumericError
from .policies import CopyPolicy

DEFAULT_STEP = 1e-3
#: negative fractions down to this size are rounding noise and get clamped.
CLAMP_TOL = 1e-9
#: invariant violations beyond this abort the integration.
BLOWUP_TOL = 1e-6
#: the interest epidemic is considered over once d drops below this.
EXTINCT_D = 1e-9


# --------------------------------------------------------------------------
# generic integrator


def _time_nodes(t0, t_end, h, breakpoints=()):
    """Yield ``t0 + k*h`` up to ``t_end`` merged with the interior breakpoints."""
    end_tol = 1e-12 * max(1.0, abs(t_end))
    pending = sorted(b for b in breakpoints if t0 < b < t_end)
    j = 0
    k = 1
    yield t0
    while True:
        tg = t0 + k * h
        if t_end - tg <= end_tol:
            tg = t_end
        if j < len(pending) and pending[j] <= tg + 1e-12:
            if tg - pending[j] < 1e-12:
                k += 1
            yield pending[j]
            j += 1
            continue
        k += 1
        yield tg
        if tg == t_end:
            return


def integrate(rhs, y0, t_end, h=DEFAULT_STEP, *, t0=0.0, breakpoints=(), guard=None, stop=None):
    """Integrate ``y' = rhs(t, y)`` with classical RK4 on a fixed grid.

    The grid is ``t0 + k*h`` plus every breakpoint in ``(t0, t_end)``; the
    last step is shortened so the final sample sits exactly at ``t_end``.
    The fourth stage is evaluated at the left limit of the step end, so a
    right-continuous control that switches at a node acts only on the
    following step.

    ``guard(y)`` may return a corrected state or raise; ``stop(t, y)``
    ends the integration early when it returns true.  Returns ``(t, Y)``
    with one row of ``Y`` per sample.
    """
    if not h > 0:
        raise ConfigurationError(f"step must be positive, got {h!r}")
    if not t_end > t0:
        raise ConfigurationError(f"t_end={t_end!r} must exceed t0={t0!r}")
    nodes = _time_nodes(t0, t_end, h, breakpoints)
    y = np.array(y0, dtype=float)
    ta = next(nodes)
    ts = [ta]
    ys = [y.copy()]
    for tb in nodes:
        dt = tb - ta
        tm = ta + 0.5 * dt
        k1 = np.asarray(rhs(ta, y))
        k2 = np.asarray(rhs(tm, y + 0.5 * dt * k1))
        k3 = np.asarray(rhs(tm, y + 0.5 * dt * k2))
        k4 = np.asarray(rhs(np.nextafter(tb, ta), y + dt * k3))
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if guard is not None:
            y = guard(tb, y)
        ts.append(tb)
        ys.append(y)
        if stop is not None and stop(tb, y):
            break
        ta = tb
    return np.array(ts), np.array(ys)


def _clamp_fraction(v, t, name):
    if v < 0.0:
        if v < -BLOWUP_TOL:
            raise IntegrationError(f"{name}={v:.3g} < 0 at t={t:.6g}")
        if v >= -CLAMP_TOL:
            return 0.0
    return v


# --------------------------------------------------------------------------
# HILT interest evolution


def hilt_rhs(b, d, Gamma, dist: ThresholdDistribution):
    """``(b', d') = (d, h(Gamma b) Gamma d (1 - b - d) - d)``."""
    if d == 0.0:
        return 0.0, 0.0
    return d, dist.hazard(Gamma * b) * Gamma * d * (1.0 - b - d) - d


def _hilt_guard(t, y):
    b = _clamp_fraction(y[0], t, "b")
    d = _clamp_fraction(y[1], t, "d")
    if b + d > 1.0 + BLOWUP_TOL:
        raise IntegrationError(f"b+d={b + d:.9g} > 1 at t={t:.6g}")
    return np.array([b, d])


@dataclass
class HiltFluidPath:
    t: np.ndarray
    b: np.ndarray
    d: np.ndarray

    @property
    def a(self):
        return self.b + self.d


def solve_hilt(Gamma, dist, d0, t_end, h=DEFAULT_STEP, *, b0=0.0, until_extinct=False):
    """Integrate the HILT fluid ODE from ``(b0, d0)``.

    With ``until_extinct`` the run stops as soon as ``d < 1e-9`` (or at
    ``t_end``, whichever is first).
    """
    stop = (lambda t, y: y[1] < EXTINCT_D) if until_extinct else None
    if d0 == 0.0 and until_extinct:
        return HiltFluidPath(np.array([0.0]), np.array([b0]), np.array([0.0]))
    t, Y = integrate(
        lambda t, y: hilt_rhs(y[0], y[1], Gamma, dist), (b0, d0), t_end, h,
        guard=_hilt_guard, stop=stop,
    )
    return HiltFluidPath(t, Y[:, 0], Y[:, 1])


def hilt_closed_form_uniform(Gamma, d0, t):
    """Exact ``(b(t), d(t))`` for uniform thresholds started at ``(0, d0)``."""
    r = 1.0 - Gamma + Gamma * d0
    t = np.asarray(t, dtype=float)
    if r == 0.0:
        zero = np.zeros_like(t)
        return zero, zero.copy()
    decay = np.exp(-r * t)
    return d0 / r * (1.0 - decay), d0 * decay


def bisect(f, lo, hi, tol=1e-10, maxiter=200):
    """Root of ``f`` on ``[lo, hi]`` by bisection; endpoints must bracket it."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NumericError(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sir_final_size(d0, reproduction, tol=1e-10):
    """Root of ``b = 1 - (1 - d0) exp(-reproduction * b)`` on ``[d0, 1]``."""
    if d0 >= 1.0:
        return 1.0
    return bisect(lambda b: b - 1.0 + (1.0 - d0) * math.exp(-reproduction * b), d0, 1.0, tol)


def terminal_fraction(dist, Gamma, d0, h=DEFAULT_STEP):
    """Final destination fraction ``b(inf)`` of the HILT fluid limit.

    Closed form for uniform thresholds, the SIR final-size equation for
    exponential ones, and integration to extinction otherwise.
    """
    if not (0.0 <= Gamma <= 1.0 and 0.0 <= d0 <= 1.0):
        raise ConfigurationError(f"need Gamma, d0 in [0, 1], got {Gamma!r}, {d0!r}")
    if isinstance(dist, Uniform01):
        r = 1.0 - Gamma + Gamma * d0
        return 0.0 if r == 0.0 else d0 / r
    if isinstance(dist, Exponential):
        return sir_final_size(d0, dist.rate * Gamma)
    path = solve_hilt(Gamma, dist, d0, 1e6, h, until_extinct=True)
    return float(path.b[-1] + path.d[-1])


# --------------------------------------------------------------------------
# SIR-SI co-evolution


@dataclass(frozen=True)
class CoevolParams:
    """Meeting rate ``lam`` (pairs meet at rate lam/N), recovery ``beta``,
    influence weight ``Gamma``, delivery target ``alpha`` and cost weight ``psi``."""

    lam: float
    beta: float
    Gamma: float
    alpha: float = 1.0
    psi: float = 0.0

    def __post_init__(self):
        if not self.lam > 0 or not self.beta > 0:
            raise ConfigurationError("lambda and beta must be positive")
        if not 0.0 <= self.Gamma <= 1.0:
            raise ConfigurationError(f"Gamma must lie in [0, 1], got {self.Gamma!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.psi >= 0.0:
            raise ConfigurationError(f"psi must be nonnegative, got {self.psi!r}")

    def default_horizon(self):
        rates = [r for r in (self.beta, self.lam * self.Gamma, 1.0) if r > 0]
        return 50.0 / min(rates)


@dataclass(frozen=True)
class CoevolFluidState:
    b: float
    d: float
    x_b: float
    x_d: float
    y: float
    t: float = 0.0

    def __post_init__(self):
        tol = CLAMP_TOL
        for name in ("b", "d", "x_b", "x_d", "y"):
            v = getattr(self, name)
            if not -tol <= v <= 1.0 + tol:
                raise ConfigurationError(f"{name}={v!r} is not a fraction")
        if self.b + self.d > 1.0 + tol or self.x_b > self.b + tol or self.x_d > self.d + tol:
            raise ConfigurationError("state violates b+d<=1, x_b<=b, x_d<=d")
        if self.y > 1.0 - self.b - self.d + tol:
            raise ConfigurationError("state violates y <= 1-b-d")

    @classmethod
    def initial(cls, d0, xd0=0.0):
        """Standard start ``(0, d0, 0, xd0, 0)``; any ``xd0`` in [0, d0] is accepted."""
        return cls(0.0, d0, 0.0, xd0, 0.0)

    def as_array(self):
        return np.array([self.b, self.d, self.x_b, self.x_d, self.y])


def coevol_rhs(state: CoevolFluidState, params: CoevolParams, policy: CopyPolicy):
    """Drift of ``(b, d, x_b, x_d, y)`` with ``sigma = policy(state.t)``."""
    lam, beta, G = params.lam, params.beta, params.Gamma
    b, d, xb, xd, y = state.b, state.d, state.x_b, state.x_d, state.y
    sigma = policy.value(state.t)
    s = 1.0 - b - d
    x = xb + xd
    return (
        beta * d,
        -beta * d + lam * G * d * s,
        beta * xd + lam * (b - xb) * (x + y),
        G * lam * (d - xd) * y + G * lam * xd * s + lam * (d - xd) * (x + y) - beta * xd,
        -G * lam * d * y + lam * sigma * (s - y) * (xb + y + (1.0 - G) * xd),
    )


@njit(cache=True)
def _drift(z, sig, lam, beta, G, out):
    b, d, xb, xd, y = z[0], z[1], z[2], z[3], z[4]
    s = 1.0 - b - d
    x = xb + xd
    out[0] = beta * d
    out[1] = -beta * d + lam * G * d * s
    out[2] = beta * xd + lam * (b - xb) * (x + y)
    out[3] = G * lam * (d - xd) * y + G * lam * xd * s + lam * (d - xd) * (x + y) - beta * xd
    out[4] = -G * lam * d * y + lam * sig * (s - y) * (xb + y + (1.0 - G) * xd)


@njit(cache=True)
def _guard(z, clamp_tol, blowup_tol):
    for i in range(5):
        if z[i] < 0.0:
            if z[i] < -blowup_tol:
                return False
            if z[i] >= -clamp_tol:
                z[i] = 0.0
    s = 1.0 - z[0] - z[1]
    if s < -blowup_tol or z[2] > z[0] + blowup_tol or z[3] > z[1] + blowup_tol:
        return False
    if z[4] > s + blowup_tol:
        return False
    return True


@njit(cache=True)
def _coevol_kernel(z0, t0, t_end, h, lam, beta, G, breaks, values, x_target, stop_on_target):
    n_grid = int(np.floor((t_end - t0) / h + 1e-9))
    cap = n_grid + breaks.size + 3
    ts = np.empty(cap)
    zs = np.empty((cap, 5))
    sig = np.empty(cap)
    z = z0.copy()
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    tmp = np.empty(5)
    nb = breaks.size
    bi = 0
    while bi < nb and breaks[bi] <= t0:
        bi += 1
    ts[0] = t0
    zs[0, :] = z
    sig[0] = values[bi]
    n = 1
    i = 0
    t = t0
    status = 0
    end_tol = 1e-12 * max(1.0, abs(t_end))
    if stop_on_target and z[2] + z[3] >= x_target:
        return ts[:n], zs[:n], sig[:n], status
    while t < t_end:
        t_grid = t0 + (i + 1) * h
        if t_end - t_grid <= end_tol:
            t_grid = t_end
        t_next = t_grid
        hit_break = False
        if bi < nb and breaks[bi] < t_end and breaks[bi] <= t_grid + 1e-12:
            t_next = breaks[bi]
            hit_break = True
            if t_grid - breaks[bi] < 1e-12:
                i += 1
        else:
            i += 1
        dt = t_next - t
        s_now = values[bi]
        _drift(z, s_now, lam, beta, G, k1)
        for j in range(5):
            tmp[j] = z[j] + 0.5 * dt * k1[j]
        _drift(tmp, s_now, lam, beta, G, k2)
        for j in range(5):
            tmp[j] = z[j] + 0.5 * dt * k2[j]
        _drift(tmp, s_now, lam, beta, G, k3)
        for j in range(5):
            tmp[j] = z[j] + dt * k3[j]
        _drift(tmp, s_now, lam, beta, G, k4)
        for j in range(5):
            z[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        t = t_next
        if hit_break:
            bi += 1
            while bi < nb and breaks[bi] <= t:
                bi += 1
        ok = _guard(z, 1e-9, 1e-6)
        ts[n] = t
        zs[n, :] = z
        sig[n] = values[bi]
        n += 1
        if not ok:
            status = 1
            break
        if stop_on_target and z[2] + z[3] >= x_target:
            break
    return ts[:n], zs[:n], sig[:n], status


@njit(cache=True)
def _sir_kernel(b, d, lamG, beta, h, t_max, d_stop):
    t = 0.0
    while d >= d_stop and t < t_max:
        # (b, d) block of the co-evolution drift; s = 1 - b - d
        k1b = beta * d
        k1d = -beta * d + lamG * d * (1.0 - b - d)
        b2 = b + 0.5 * h * k1b
        d2 = d + 0.5 * h * k1d
        k2b = beta * d2
        k2d = -beta * d2 + lamG * d2 * (1.0 - b2 - d2)
        b3 = b + 0.5 * h * k2b
        d3 = d + 0.5 * h * k2d
        k3b = beta * d3
        k3d = -beta * d3 + lamG * d3 * (1.0 - b3 - d3)
        b4 = b + h * k3b
        d4 = d + h * k3d
        k4b = beta * d4
        k4d = -beta * d4 + lamG * d4 * (1.0 - b4 - d4)
        b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        d += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        t += h
    return b, d, t


@dataclass
class CoevolPath:
    """Sampled solution of the co-evolution ODE; ``z`` columns are b, d, x_b, x_d, y."""

    t: np.ndarray
    z: np.ndarray
    sigma: np.ndarray
    a_inf: float = field(default=math.nan)

    b = property(lambda self: self.z[:, 0])
    d = property(lambda self: self.z[:, 1])
    x_b = property(lambda self: self.z[:, 2])
    x_d = property(lambda self: self.z[:, 3])
    y = property(lambda self: self.z[:, 4])

    @property
    def x(self):
        return self.z[:, 2] + self.z[:, 3]

    @property
    def a(self):
        return self.z[:, 0] + self.z[:, 1]

    @property
    def s(self):
        return 1.0 - self.a

    def at(self, t):
        """Linear interpolation of all five components at time ``t``."""
        return np.array([np.interp(t, self.t, self.z[:, j]) for j in range(5)])


def _as_state(initial):
    if isinstance(initial, CoevolFluidState):
        return initial
    return CoevolFluidState(*initial)


def terminal_destinations(params: CoevolParams, initial, h=DEFAULT_STEP, t_max=1e5):
    """``a(inf)``: integrate the closed (b, d) block until ``d < 1e-9``."""
    st = _as_state(initial)
    if st.d < EXTINCT_D:
        return st.b + st.d
    b, d, t = _sir_kernel(st.b, st.d, params.lam * params.Gamma, params.beta, h, t_max, EXTINCT_D)
    if d >= EXTINCT_D:
        raise NumericError(f"interest epidemic still active (d={d:.3g}) at t={t:.6g}")
    return b + d


def solve_coevol(params: CoevolParams, initial, policy: CopyPolicy, t_end=None,
                 h=DEFAULT_STEP, *, stop_at_x=None):
    """Integrate the controlled co-evolution ODE.

    With ``stop_at_x`` the run ends at the first sample where
    ``x_b + x_d >= stop_at_x``.
    """
    st = _as_state(initial)
    if t_end is None:
        t_end = st.t + params.default_horizon()
    if not h > 0 or not t_end > st.t:
        raise ConfigurationError(f"need h > 0 and t_end > t0, got h={h!r}, t_end={t_end!r}")
    breaks, values = policy.as_arrays()
    ts, zs, sig, status = _coevol_kernel(
        st.as_array(), float(st.t), float(t_end), float(h),
        params.lam, params.beta, params.Gamma, breaks, values,
        -1.0 if stop_at_x is None else float(stop_at_x), stop_at_x is not None,
    )
    if status:
        raise IntegrationError(f"simplex invariant violated near t={ts[-1]:.6g}: {zs[-1]}")
    return CoevolPath(ts, zs, sig)


def target_time(t, x, alpha, a_inf):
    """First time ``x`` reaches ``alpha * a_inf``, linearly interpolated.

    Returns ``math.inf`` when the samples never reach the target.
    """
    target = alpha * a_inf
    x = np.asarray(x)
    if x[0] >= target:
        return float(t[0])
    hits = np.flatnonzero(x >= target)
    if hits.size == 0:
        return math.inf
    i = hits[0]
    x0, x1 = x[i - 1], x[i]
    frac = (target - x0) / (x1 - x0)
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _hermite(p0, p1, m0, m1, dt, th):
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * p0 + h10 * dt * m0 + h01 * p1 + h11 * dt * m1


def crossing(path: CoevolPath, params: CoevolParams, x_target):
    """First time ``x >= x_target`` and the state there, or ``(inf, None)``.

    Inside the bracketing step the state is a cubic Hermite interpolant
    built from the drift at both ends, which keeps the O(h^4) accuracy of
    the integrator (linear interpolation would only give O(h^2)).
    """
    x = path.x
    if x[0] >= x_target:
        return float(path.t[0]), path.z[0].copy()
    hits = np.flatnonzero(x >= x_target)
    if hits.size == 0:
        return math.inf, None
    i = int(hits[0])
    t0, t1 = path.t[i - 1], path.t[i]
    z0, z1 = path.z[i - 1], path.z[i]
    sig = path.sigma[i - 1]  # in force on [t0, t1)
    m0, m1 = np.empty(5), np.empty(5)
    _drift(z0, sig, params.lam, params.beta, params.Gamma, m0)
    _drift(z1, sig, params.lam, params.beta, params.Gamma, m1)
    dt = t1 - t0
    xs = lambda th: _hermite(z0[2] + z0[3], z1[2] + z1[3], m0[2] + m0[3], m1[2] + m1[3], dt, th)
    th = bisect(lambda th: xs(th) - x_target, 0.0, 1.0, 1e-15)
    return float(t0 + th * dt), _hermite(z0, z1, m0, m1, dt, th)
