"""Scenario description: initial data families, optional source terms and the
numerics settings for one simulation run."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParams
from .model import ModelParams, SpatialGrid, Variant
from .profiles import BoundaryData


class Scheme(str, enum.Enum):
    IMEX = "imex"
    FULLY_EXPLICIT = "explicit"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        if key in ("fully-explicit", "fullyexplicit"):
            return cls.FULLY_EXPLICIT
        return cls(key)


class FluxStencil(str, enum.Enum):
    CENTRAL = "central"
    UPWIND = "upwind"


@dataclass(frozen=True)
class NumericsConfig:
    dt: float
    t_end: float
    n: int = 201
    cfl_safety: float = 0.9
    scheme: Scheme = Scheme.IMEX
    positivity_floor: float = 0.0
    hyperbolic_flux: FluxStencil = FluxStencil.CENTRAL
    v_damping: float = 1.0   # sawtooth damping rate / 4 in the hyperbolic v update

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "hyperbolic_flux", FluxStencil(self.hyperbolic_flux))
        if not self.dt > 0 or not self.t_end > 0:
            raise InvalidParams("dt and t_end must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise InvalidParams(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.v_damping >= 0:
            raise InvalidParams("v_damping must be non-negative")
        if not self.positivity_floor >= 0:
            raise InvalidParams("positivity_floor must be non-negative")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidParams(f"grid needs n >= 3 nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def n_steps(self):
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))


# -- initial data ------------------------------------------------------------
#
# ``evaluate(grid, reference)`` receives the reference profile at t = 0
# (alpha for u; beta, or zeros in the hyperbolic system, for v).

@dataclass(frozen=True)
class ConstantInitial:
    value: float
    family = "constant"

    def evaluate(self, grid, reference):
        return np.full(grid.n, float(self.value))


@dataclass(frozen=True)
class AffineInitial:
    left: float
    right: float
    family = "affine"

    def evaluate(self, grid, reference):
        s = grid.normalized()
        return (1.0 - s) * self.left + s * self.right


@dataclass(frozen=True)
class ProfilePlusSine:
    """reference + offset + amplitude * sin(mode * pi * xhat)."""

    amplitude: float
    mode: int = 1
    offset: float = 0.0
    family = "profile-plus-sine"

    def evaluate(self, grid, reference):
        s = grid.normalized()
        return np.asarray(reference) + self.offset + self.amplitude * np.sin(self.mode * np.pi * s)


@dataclass(frozen=True)
class ManufacturedInitial:
    component: str  # "u" or "v"
    family = "manufactured"

    def evaluate(self, grid, reference):
        u, v = manufactured_solution(grid, 0.0)
        return u if self.component == "u" else v


@dataclass(frozen=True, eq=False)
class TabulatedInitial:
    """(x, value) samples, linearly re-interpolated onto the run grid."""

    x: np.ndarray
    values: np.ndarray
    family = "table"

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
        x, y = zip(*rows)
        return cls(np.array(x), np.array(y))

    def evaluate(self, grid, reference):
        return np.interp(grid.x, self.x, self.values)


# -- manufactured solution ---------------------------------------------------
#
#   u*(x,t) = 1 + 1/2 e^{-t} sin(pi xh),   v*(x,t) = 1/2 e^{-t} xh (1 - xh),
#   xh = (x - a)/(b - a); boundary data are alpha = 1, beta = 0.

def manufactured_solution(grid: SpatialGrid, t):
    s = grid.normalized()
    e = math.exp(-t)
    return 1.0 + 0.5 * e * np.sin(np.pi * s), 0.5 * e * s * (1.0 - s)


@dataclass(frozen=True)
class ManufacturedSource:
    """Source terms that make (u*, v*) an exact solution of the forced system."""

    variant: Variant
    gamma: float = 1.0
    family = "manufactured"

    def __call__(self, grid: SpatialGrid, t):
        L = grid.length
        s = grid.normalized()
        e = math.exp(-t)
        k = np.pi / L
        sn, cs = np.sin(np.pi * s), np.cos(np.pi * s)
        u = 1.0 + 0.5 * e * sn
        u_t = -0.5 * e * sn
        u_x = 0.5 * e * k * cs
        u_xx = -0.5 * e * k * k * sn
        v = 0.5 * e * s * (1.0 - s)
        v_t = -v
        v_x = 0.5 * e * (1.0 - 2.0 * s) / L
        v_xx = -e / (L * L)
        g = self.gamma
        pow_x = g * u ** (g - 1.0) * u_x
        src_u = u_t - u_xx - (u_x * v + u * v_x) - u * (1.0 - u)
        if Variant.parse(self.variant) is Variant.PARABOLIC_PARABOLIC:
            src_v = v_t - v_xx - 2.0 * v * v_x - pow_x
        else:
            src_v = v_t - pow_x
        return src_u, src_v


@dataclass(frozen=True)
class DiagnosticsSettings:
    cadence: int = 10
    threshold_fraction: float = 1e-2
    compat_tol: float = 1e-10
    bound_oversampling: int = 10   # alpha bounds sampled at dt / oversampling

    def __post_init__(self):
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise InvalidParams("diagnostics cadence must be a positive integer")


@dataclass(frozen=True)
class Scenario:
    name: str
    model: ModelParams
    boundary: BoundaryData
    initial_u: object
    initial_v: object
    numerics: NumericsConfig
    diagnostics: DiagnosticsSettings = field(default_factory=DiagnosticsSettings)
    source: object = None
    output_dir: str | None = None

    @property
    def grid(self):
        return SpatialGrid.on(self.model, self.numerics.n)

    def with_grid(self, n):
        return replace(self, numerics=replace(self.numerics, n=int(n)))
