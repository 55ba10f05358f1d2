"""Threshold distributions for the homogeneous linear threshold model.

Each distribution exposes ``cdf``, ``density`` and ``hazard``.  The hazard
``h(x) = f(x) / (1 - F(x))`` drives the conversion rate of relays in the
fluid limit, so it is the quantity the ODE right-hand sides consume.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

#: cdf values at or above ``1 - HAZARD_EPS`` make the hazard undefined.
HAZARD_EPS = 1e-12


class ThresholdDistribution:
    """Common interface; concrete kinds are the dataclasses below."""

    kind: str = "abstract"

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def density(self, x: float) -> float:
        raise NotImplementedError

    def ppf(self, u: float) -> float:
        """Inverse cdf, for inverse-transform sampling of thresholds."""
        raise NotImplementedError

    def hazard(self, x: float) -> float:
        F = self.cdf(x)
        if F >= 1.0 - HAZARD_EPS:
            raise DomainError(f"hazard undefined at x={x!r}: cdf={F!r} at support end")
        return self.density(x) / (1.0 - F)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.array([self.ppf(u) for u in rng.random(size)])


@dataclass(frozen=True)
class Uniform01(ThresholdDistribution):
    kind = "uniform"

    @property
    def support(self):
        return (0.0, 1.0)

    def cdf(self, x):
        return min(max(x, 0.0), 1.0)

    def density(self, x):
        return 1.0 if 0.0 <= x < 1.0 else 0.0

    def hazard(self, x):
        if x >= 1.0 - HAZARD_EPS:
            raise DomainError(f"hazard undefined at x={x!r}: cdf reaches 1 at support end")
        if x < 0.0:
            return 0.0
        return 1.0 / (1.0 - x)

    def ppf(self, u):
        return min(max(u, 0.0), 1.0)


@dataclass(frozen=True)
class Exponential(ThresholdDistribution):
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ConfigurationError(f"exponential rate must be positive, got {self.rate!r}")

    @property
    def support(self):
        return (0.0, math.inf)

    def cdf(self, x):
        if x <= 0.0:
            return 0.0
        return -math.expm1(-self.rate * x)

    def density(self, x):
        if x < 0.0:
            return 0.0
        return self.rate * math.exp(-self.rate * x)

    def hazard(self, x):
        # Memoryless: constant hazard, returned exactly rather than as a ratio.
        if self.cdf(x) >= 1.0 - HAZARD_EPS:
            raise DomainError(f"hazard undefined at x={x!r}: cdf numerically equal to 1")
        return self.rate if x >= 0.0 else 0.0

    def ppf(self, u):
        if u >= 1.0:
            return math.inf
        return -math.log1p(-max(u, 0.0)) / self.rate


@dataclass(frozen=True, eq=False)
class Tabulated(ThresholdDistribution):
    """Empirical threshold cdf, linearly interpolated between grid points.

    The density is the slope of the segment to the right of ``x`` (the
    left segment at the last knot).  Thresholds are assumed to have a
    density with bounded derivative; this cannot be checked from a table
    and remains the caller's responsibility.
    """

    x: np.ndarray
    F: np.ndarray
    kind = "custom"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        F = np.asarray(self.F, dtype=float)
        if x.ndim != 1 or x.shape != F.shape or x.size < 2:
            raise ConfigurationError("tabulated cdf needs two equal-length columns with >= 2 rows")
        if not np.all(np.diff(x) > 0):
            raise ConfigurationError("tabulated cdf grid must be strictly increasing in x")
        if np.any(np.diff(F) < 0):
            raise ConfigurationError("tabulated cdf values must be nondecreasing")
        if abs(F[0]) > 1e-12 or abs(F[-1] - 1.0) > 1e-9:
            raise ConfigurationError(
                f"tabulated cdf must run from 0 to 1, got F[0]={F[0]!r}, F[-1]={F[-1]!r}"
            )
        F = F.copy()
        F[0], F[-1] = 0.0, 1.0
        x.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "_slopes", np.diff(F) / np.diff(x))

    @property
    def support(self):
        return (float(self.x[0]), float(self.x[-1]))

    def cdf(self, x):
        return float(np.interp(x, self.x, self.F))

    def density(self, x):
        if x < self.x[0] or x > self.x[-1]:
            return 0.0
        i = int(np.searchsorted(self.x, x, side="right")) - 1
        return float(self._slopes[min(i, self._slopes.size - 1)])

    def ppf(self, u):
        # np.interp needs increasing abscissae; flat cdf stretches pick the left end.
        u = min(max(u, 0.0), 1.0)
        i = int(np.searchsorted(self.F, u, side="left"))
        if i == 0:
            return float(self.x[0])
        F0, F1 = self.F[i - 1], self.F[i]
        x0, x1 = self.x[i - 1], self.x[i]
        return float(x0 + (u - F0) / (F1 - F0) * (x1 - x0))

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Load a two-column ``x,F(x)`` table; a non-numeric first row is a header."""
        rows = []
        with Path(path).open(newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ConfigurationError(f"{path}:{lineno}: expected two numbers, got {row!r}")
        if not rows:
            raise ConfigurationError(f"{path}: no data rows")
        xs, Fs = zip(*rows)
        return cls(np.array(xs), np.array(Fs))


def from_spec(spec) -> ThresholdDistribution:
    """Build a distribution from a config value.

    Accepts ``"uniform"``, ``{"kind": "exponential", "rate": 2}`` or
    ``{"kind": "custom", "path": "thresholds.csv"}``.
    """
    if isinstance(spec, ThresholdDistribution):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError(f"threshold distribution: expected a kind, got {spec!r}")
    kind = spec["kind"]
    if kind == "uniform":
        return Uniform01()
    if kind == "exponential":
        return Exponential(float(spec.get("rate", 1.0)))
    if kind == "custom":
        if "path" in spec:
            return Tabulated.from_csv(spec["path"])
        return Tabulated(np.array(spec["x"]), np.array(spec["F"]))
    raise ConfigurationError(f"unknown threshold distribution kind {kind!r}")


def describe(dist: ThresholdDistribution):
    """JSON-serialisable description, the inverse of :func:`from_spec`."""
    if isinstance(dist, Exponential):
        return {"kind": "exponential", "rate": dist.rate}
    if isinstance(dist, Tabulated):
        return {"kind": "custom", "x": dist.x.tolist(), "F": dist.F.tolist()}
    return {"kind": dist.kind}
