"""Copy-control policies: the probability of copying content to a relay."""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


class CopyPolicy:
    """A right-continuous, piecewise-constant schedule ``sigma(t)`` in [0, 1]."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(breaks, values)`` with ``values[i]`` in force on ``[breaks[i-1], breaks[i])``."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _check_prob(v, what):
    if not (0.0 <= v <= 1.0):
        raise ConfigurationError(f"{what} must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class Constant(CopyPolicy):
    sigma: float

    def __post_init__(self):
        _check_prob(self.sigma, "sigma")

    def value(self, t):
        return self.sigma

    def as_arrays(self):
        return np.empty(0), np.array([self.sigma], dtype=float)

    def describe(self):
        return {"kind": "constant", "sigma": self.sigma}


@dataclass(frozen=True)
class TimeThreshold(CopyPolicy):
    """Copy with probability 1 before ``tau`` and never from ``tau`` on."""

    tau: float

    def __post_init__(self):
        if not self.tau >= 0.0:
            raise ConfigurationError(f"tau must be nonnegative, got {self.tau!r}")

    def value(self, t):
        return 1.0 if t < self.tau else 0.0

    @property
    def breakpoints(self):
        return (self.tau,) if math.isfinite(self.tau) else ()

    def as_arrays(self):
        if not math.isfinite(self.tau):
            return np.empty(0), np.array([1.0])
        return np.array([self.tau]), np.array([1.0, 0.0])

    def describe(self):
        return {"kind": "threshold", "tau": self.tau}


@dataclass(frozen=True)
class PiecewiseConstant(CopyPolicy):
    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        values = tuple(float(v) for v in self.values)
        if len(values) != len(breaks) + 1:
            raise ConfigurationError("piecewise policy needs len(values) == len(breaks) + 1")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ConfigurationError("piecewise policy breakpoints must be strictly increasing")
        for v in values:
            _check_prob(v, "sigma")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    def value(self, t):
        return self.values[bisect_right(self.breaks, t)]

    @property
    def breakpoints(self):
        return self.breaks

    def as_arrays(self):
        return np.array(self.breaks, dtype=float), np.array(self.values, dtype=float)

    def describe(self):
        return {"kind": "piecewise", "breaks": list(self.breaks), "values": list(self.values)}


def from_spec(spec) -> CopyPolicy:
    """Policy from a config value: a number, ``{"tau": 4}`` or a full dict."""
    if isinstance(spec, CopyPolicy):
        return spec
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    if not isinstance(spec, dict):
        raise ConfigurationError(f"policy: cannot interpret {spec!r}")
    kind = spec.get("kind", "threshold" if "tau" in spec else "constant")
    if kind == "constant":
        return Constant(float(spec["sigma"]))
    if kind == "threshold":
        return TimeThreshold(float(spec["tau"]))
    if kind == "piecewise":
        return PiecewiseConstant(tuple(spec["breaks"]), tuple(spec["values"]))
    raise ConfigurationError(f"unknown policy kind {kind!r}")
