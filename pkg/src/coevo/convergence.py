"""Empirical checks that the scaled Markov chains approach their fluid limits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ctmc, fluid, hilt
from ._parallel import pmap
from .policies import CopyPolicy

#: documented SIR-SI parameter set for convergence studies
SIRSI_DEFAULTS = dict(lam=3.0, beta=1.0, Gamma=0.5, alpha=0.8, psi=1.0, d0=0.1, xd0=0.05,
                      horizon=10.0)


def hilt_distance(path: hilt.HiltPath, ode: fluid.HiltFluidPath) -> float:
    """``sup_t max(|B/N - b|, |D/N - d|)`` over the ODE sample times."""
    Bf, Df = path.fractions_at(ode.t)
    return float(max(np.max(np.abs(Bf - ode.b)), np.max(np.abs(Df - ode.d))))


def ctmc_distance(path: ctmc.CtmcPath, ode: fluid.CoevolPath) -> float:
    """Sup over the ODE sample times of the max-norm gap between ``Z(t)/N`` and ``z(t)``."""
    return float(np.max(np.abs(path.fractions_at(ode.t) - ode.z)))


@dataclass
class ConvergenceRow:
    N: int
    median: float
    q25: float
    q75: float
    distances: list
    seeds: list

    @property
    def iqr(self):
        return self.q75 - self.q25


def _summarise(N, dists, seeds):
    q25, med, q75 = np.percentile(dists, [25, 50, 75])
    return ConvergenceRow(N, float(med), float(q25), float(q75), list(dists), list(seeds))


def _hilt_run(task):
    params, horizon, seed, ode = task
    return hilt_distance(hilt.run_scaled(params, horizon, hilt.make_rng(seed), seed=seed), ode)


def _ctmc_run(task):
    start, params, policy, horizon, seed, ode = task
    path = ctmc.run_ctmc(start, params, policy, horizon, hilt.make_rng(seed), seed=seed)
    return ctmc_distance(path, ode)


def _validate(N_list, seeds):
    if len(N_list) < 2:
        raise ValueError("need at least two population sizes")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("population sizes must be strictly increasing")
    if not seeds:
        raise ValueError("need at least one seed")


def hilt_study(N_list, seeds, Gamma=0.9, d0=0.2, dist=None, horizon=10.0, h=1e-2, jobs=1):
    """Scaled-HILT sup-norm distance to the ODE, one row per ``N``.

    The ODE starts from ``d0``; the chain from ``round(d0 N)`` destinations.
    """
    _validate(N_list, seeds)
    dist = dist or hilt.Uniform01()
    ode = fluid.solve_hilt(Gamma, dist, d0, horizon, h)
    rows = []
    for N in N_list:
        params = hilt.HiltParams(N, Gamma, dist, int(round(d0 * N)))
        dists = pmap(_hilt_run, [(params, horizon, s, ode) for s in seeds], jobs)
        rows.append(_summarise(N, dists, seeds))
    return rows


def sirsi_study(N_list, seeds, params: fluid.CoevolParams, policy: CopyPolicy, d0, xd0,
                horizon=10.0, h=1e-2, jobs=1):
    """SIR-SI CTMC sup-norm distance to the controlled ODE, one row per ``N``."""
    _validate(N_list, seeds)
    ode = fluid.solve_coevol(params, fluid.CoevolFluidState.initial(d0, xd0), policy, horizon, h)
    rows = []
    for N in N_list:
        start = ctmc.CoevolCounts.initial(N, int(round(d0 * N)), int(round(xd0 * N)))
        tasks = [(start, params, policy, horizon, s, ode) for s in seeds]
        rows.append(_summarise(N, pmap(_ctmc_run, tasks, jobs), seeds))
    return rows


def strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))
