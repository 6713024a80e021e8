"""Boundary signals, the dynamic reference profiles and the forcing budgets.

Signals are small frozen dataclasses rather than closures so that scenarios
pickle cleanly into sweep worker processes.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParams, MissingBetaSignals
from .model import Field, SpatialGrid


class SignalKind(str, enum.Enum):
    ANALYTIC = "analytic"
    TABULATED = "tabulated"


class BoundarySignal:
    kind = SignalKind.ANALYTIC
    family = "custom"

    def value(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def params(self):
        """Numeric parameters of the family, for metadata and sweeps."""
        return {}


@dataclass(frozen=True)
class Constant(BoundarySignal):
    c: float = 1.0
    family = "constant"

    def value(self, t):
        return self.c + 0.0 * np.asarray(t, dtype=float)

    def derivative(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class OnePlusExpDecay(BoundarySignal):
    """1 + c exp(-rate t)"""

    c: float
    rate: float = 1.0
    family = "one-plus-exp-decay"

    def value(self, t):
        return 1.0 + self.c * np.exp(-self.rate * np.asarray(t, dtype=float))

    def derivative(self, t):
        return -self.rate * self.c * np.exp(-self.rate * np.asarray(t, dtype=float))

    def params(self):
        return {"c": self.c, "rate": self.rate}


@dataclass(frozen=True)
class ExpDecay(BoundarySignal):
    """c exp(-rate t)"""

    c: float
    rate: float = 1.0
    family = "exp-decay"

    def value(self, t):
        return self.c * np.exp(-self.rate * np.asarray(t, dtype=float))

    def derivative(self, t):
        return -self.rate * self.value(t)

    def params(self):
        return {"c": self.c, "rate": self.rate}


@dataclass(frozen=True)
class DampedOscillation(BoundarySignal):
    """offset + c exp(-rate t) cos(omega t)"""

    c: float
    rate: float = 1.0
    omega: float = 1.0
    offset: float = 0.0
    family = "damped-oscillation"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self.offset + self.c * np.exp(-self.rate * t) * np.cos(self.omega * t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        decay = self.c * np.exp(-self.rate * t)
        return -decay * (self.rate * np.cos(self.omega * t) + self.omega * np.sin(self.omega * t))

    def params(self):
        return {"c": self.c, "rate": self.rate, "omega": self.omega, "offset": self.offset}


@dataclass(frozen=True)
class OnePlusAlgebraicDecay(BoundarySignal):
    """1 + c / (1 + t)**power; power <= 1 is not integrable on [0, inf)."""

    c: float
    power: float = 1.0
    family = "one-plus-algebraic-decay"

    def value(self, t):
        return 1.0 + self.c * (1.0 + np.asarray(t, dtype=float)) ** (-self.power)

    def derivative(self, t):
        return -self.power * self.c * (1.0 + np.asarray(t, dtype=float)) ** (-self.power - 1.0)

    def params(self):
        return {"c": self.c, "power": self.power}


@dataclass(frozen=True, eq=False)
class Tabulated(BoundarySignal):
    """Piecewise-linear signal through (times, values).

    The derivative is the slope of the interval containing t (right-continuous
    at knots), so value and derivative are mutually consistent. Outside the
    table the end values are held with zero slope.
    """

    times: np.ndarray
    values: np.ndarray
    kind = SignalKind.TABULATED
    family = "table"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size < 2:
            raise InvalidParams("a table needs at least two (t, value) rows")
        if np.any(np.diff(t) <= 0):
            raise InvalidParams("table times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "_slopes", np.diff(y) / np.diff(t))

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        t, y = zip(*rows)
        return cls(np.array(t), np.array(y))

    def value(self, t):
        return np.interp(t, self.times, self.values)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (t >= self.times[0]) & (t < self.times[-1])
        slope = self._slopes[np.clip(idx, 0, self._slopes.size - 1)]
        return np.where(inside, slope, 0.0)

    def params(self):
        return {"rows": int(self.times.size)}


@dataclass(frozen=True, eq=False)
class AnalyticSignal(BoundarySignal):
    """Wraps a user-supplied value function and its exact derivative."""

    value_fn: Callable
    derivative_fn: Callable

    def value(self, t):
        return self.value_fn(t)

    def derivative(self, t):
        return self.derivative_fn(t)


@dataclass(frozen=True)
class AlphaBounds:
    """Sampled lower/upper bounds of the u boundary data over [0, horizon]."""

    alpha1_min: float
    alpha2_min: float
    alpha_min: float
    alpha_max: float
    horizon: float
    resolution: float


@dataclass(frozen=True)
class BoundaryData:
    alpha1: BoundarySignal
    alpha2: BoundarySignal
    beta1: BoundarySignal | None = None
    beta2: BoundarySignal | None = None

    def __post_init__(self):
        if (self.beta1 is None) != (self.beta2 is None):
            raise InvalidParams("beta1 and beta2 must be given together")

    @property
    def has_beta(self):
        return self.beta1 is not None

    def signals(self):
        out = {"alpha1": self.alpha1, "alpha2": self.alpha2}
        if self.has_beta:
            out.update(beta1=self.beta1, beta2=self.beta2)
        return out

    def alpha_bounds(self, horizon, dt, extra_times=()):
        """Dense sampling of alpha_1, alpha_2 on [0, horizon] with step <= dt.

        ``extra_times`` are added to the sample set, so bounds are exact at
        every time the caller will evaluate (e.g. diagnostic sample times).
        """
        m = max(1, math.ceil(horizon / dt))
        t = np.concatenate([np.linspace(0.0, horizon, m + 1), np.asarray(extra_times, dtype=float)])
        a1 = np.asarray(self.alpha1.value(t), dtype=float)
        a2 = np.asarray(self.alpha2.value(t), dtype=float)
        return AlphaBounds(
            alpha1_min=float(a1.min()),
            alpha2_min=float(a2.min()),
            alpha_min=float(min(a1.min(), a2.min())),
            alpha_max=float(max(a1.max(), a2.max())),
            horizon=float(horizon),
            resolution=float(horizon / m),
        )

    def check_positive(self, horizon, dt):
        bounds = self.alpha_bounds(horizon, dt)
        if not bounds.alpha_min > 0:
            raise InvalidParams(
                f"u boundary data must stay positive; sampled min = {bounds.alpha_min:g}"
            )
        return bounds


@dataclass(frozen=True, eq=False)
class ReferenceProfileSample:
    t: float
    alpha: Field
    beta: Field | None = None
    psi: float | None = None

    @property
    def grid(self):
        return self.alpha.grid

    def v_reference(self):
        """Values of the v reference (beta profile, or psi broadcast)."""
        if self.beta is not None:
            return self.beta.values
        return np.full(self.grid.n, self.psi if self.psi is not None else 0.0)


def _interpolate(left, right, grid: SpatialGrid):
    vals = left + grid.normalized() * (right - left)   # exactly constant when left == right
    vals[0], vals[-1] = left, right
    return Field(grid, vals)


def alpha_profile(bd: BoundaryData, grid: SpatialGrid, t) -> Field:
    return _interpolate(float(bd.alpha1.value(t)), float(bd.alpha2.value(t)), grid)


def beta_profile(bd: BoundaryData, grid: SpatialGrid, t) -> Field:
    if not bd.has_beta:
        raise MissingBetaSignals("boundary data carry no beta signals")
    return _interpolate(float(bd.beta1.value(t)), float(bd.beta2.value(t)), grid)


def flux_difference(bd: BoundaryData, gamma, t):
    """alpha_2^gamma - alpha_1^gamma, the net v-mass influx rate."""
    return np.asarray(bd.alpha2.value(t)) ** gamma - np.asarray(bd.alpha1.value(t)) ** gamma


def psi_average(bd: BoundaryData, v0_integral, gamma, t, quadrature_dt, length=1.0):
    """Spatial average of v in the hyperbolic system at time t.

    ``v0_integral`` is the integral of v0 over the domain, ``length`` = b - a.
    The time integral uses the composite trapezoid rule with step <= quadrature_dt.
    """
    if t < 0 or not quadrature_dt > 0:
        raise InvalidParams("psi_average needs t >= 0 and quadrature_dt > 0")
    if t == 0:
        return v0_integral / length
    m = max(1, math.ceil(t / quadrature_dt))
    tau = np.linspace(0.0, t, m + 1)
    f = flux_difference(bd, gamma, tau)
    influx = (t / m) * (np.sum(f) - 0.5 * (f[0] + f[-1]))
    return (v0_integral + influx) / length


def forcing_Y(bd: BoundaryData, t):
    a1, a2 = bd.alpha1.value(t), bd.alpha2.value(t)
    return (
        np.abs(1.0 - a1)
        + np.abs(a2 - a1)
        + np.abs(bd.alpha1.derivative(t))
        + np.abs(bd.alpha2.derivative(t))
    )


def forcing_X(bd: BoundaryData, t):
    if not bd.has_beta:
        raise MissingBetaSignals("X(t) needs beta signals; use forcing_Y for the hyperbolic system")
    return (
        forcing_Y(bd, t)
        + np.abs(bd.beta2.value(t) - bd.beta1.value(t))
        + np.abs(bd.beta1.derivative(t))
        + np.abs(bd.beta2.derivative(t))
    )


class Verdict(str, enum.Enum):
    SATISFIED = "Satisfied"
    SUSPECT = "Suspect"


@dataclass(frozen=True)
class BAReport:
    integrals: dict
    tails: dict
    verdict: Verdict
    alpha1_min: float
    alpha2_min: float
    horizon: float
    resolution: float
    tail_fraction: float
    threshold: float
    note: str = "heuristic: tail over the last part of the horizon vs total integral"


def ba_integrability_check(bd: BoundaryData, horizon, dt, tail_fraction=0.1, threshold=0.01,
                           floor=1e-14):
    """Numerical proxy for W^{1,1}(R+) membership of the boundary data.

    Each of |alpha_i - 1|, |beta_i| and the absolute derivatives is integrated
    over [0, horizon]; a component whose integral over the last
    ``tail_fraction`` of the horizon exceeds ``threshold`` of its total makes
    the verdict Suspect. Components with total below ``floor`` are ignored.
    """
    if not horizon > 0:
        raise InvalidParams("horizon must be positive")
    m = max(10, math.ceil(horizon / dt))
    t = np.linspace(0.0, horizon, m + 1)
    step = horizon / m
    tail_start = int(round((1.0 - tail_fraction) * m))

    comps = {
        "alpha1-1": np.abs(bd.alpha1.value(t) - 1.0),
        "alpha2-1": np.abs(bd.alpha2.value(t) - 1.0),
        "alpha1'": np.abs(bd.alpha1.derivative(t)),
        "alpha2'": np.abs(bd.alpha2.derivative(t)),
    }
    if bd.has_beta:
        comps.update({
            "beta1": np.abs(bd.beta1.value(t)),
            "beta2": np.abs(bd.beta2.value(t)),
            "beta1'": np.abs(bd.beta1.derivative(t)),
            "beta2'": np.abs(bd.beta2.derivative(t)),
        })

    def trap(f):
        return float(step * (np.sum(f) - 0.5 * (f[0] + f[-1]))) if f.size > 1 else 0.0

    integrals, tails = {}, {}
    verdict = Verdict.SATISFIED
    for name, f in comps.items():
        f = np.broadcast_to(f, t.shape)
        total = trap(f)
        tail = trap(f[tail_start:])
        integrals[name] = total
        tails[name] = tail
        if total > floor and not tail < threshold * total:
            verdict = Verdict.SUSPECT
    a1 = np.asarray(bd.alpha1.value(t))
    a2 = np.asarray(bd.alpha2.value(t))
    return BAReport(
        integrals=integrals,
        tails=tails,
        verdict=verdict,
        alpha1_min=float(np.min(a1)),
        alpha2_min=float(np.min(a2)),
        horizon=float(horizon),
        resolution=float(step),
        tail_fraction=tail_fraction,
        threshold=threshold,
    )
