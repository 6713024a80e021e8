"""Model parameters, grids, fields and the variable changes that lead to the
normalized chemotaxis-growth systems.

The simulated equations are the normalized ones (chi=-1, D=r=1, epsilon in
{0, 1}); :func:`nondimensionalize` maps a physical parameter set onto that
form and reports the scale factors it used.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    IncompatibleData,
    InvalidParams,
    NonPositiveInitialDensity,
    NonPositiveInput,
    RejectedRegime,
)

DEFAULT_COMPAT_TOL = 1e-10


class Variant(str, enum.Enum):
    PARABOLIC_PARABOLIC = "parabolic-parabolic"
    PARABOLIC_HYPERBOLIC = "parabolic-hyperbolic"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"pp": cls.PARABOLIC_PARABOLIC, "ph": cls.PARABOLIC_HYPERBOLIC}
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class PhysicalParams:
    chi: float
    D: float
    epsilon: float
    kappa1: float
    kappa2: float
    mu: float
    sigma: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        bad = [name for name in ("D", "kappa1", "kappa2") if not getattr(self, name) > 0]
        if not self.epsilon >= 0:
            bad.append("epsilon")
        if not self.gamma >= 1:
            bad.append("gamma")
        if bad:
            raise InvalidParams(f"parameter(s) out of range: {', '.join(bad)}")
        if not self.chi * self.mu > 0:
            raise RejectedRegime(
                f"chi*mu = {self.chi * self.mu:g} <= 0 lies in the blow-up regime"
            )


@dataclass(frozen=True)
class ModelParams:
    variant: Variant
    gamma: float = 1.0
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))
        if not b - a > 0:
            raise InvalidParams(f"empty domain [{a}, {b}]")
        if not self.gamma >= 1:
            raise InvalidParams(f"gamma must be >= 1, got {self.gamma}")

    @property
    def hyperbolic(self):
        return self.variant is Variant.PARABOLIC_HYPERBOLIC

    @property
    def outside_theory(self):
        """True for the hyperbolic system with 1 < gamma < 2 (no stability result)."""
        return self.hyperbolic and 1.0 < self.gamma < 2.0

    @property
    def length(self):
        return self.domain[1] - self.domain[0]


@dataclass(frozen=True)
class ScalingReport:
    r: float
    v_scale: float
    x_scale: float
    x_sign: int
    t_scale: float
    chemical_diffusion: float   # epsilon / D in front of v_xx
    quadratic_flux: float       # epsilon / chi in front of (v^2)_x
    domain: tuple
    orientation_flipped: bool
    normalized: bool            # r == 1 and epsilon/D in {0, 1}


def nondimensionalize(p: PhysicalParams, domain=(0.0, 1.0)):
    """Rescale ``p`` to the normalized system; returns ``(ModelParams, ScalingReport)``.

    Only magnitudes of the x-scale are folded into the domain; its sign is kept
    separately in the report (a negative chi reverses orientation).
    """
    p.__post_init__()
    k2g = p.kappa2 ** p.gamma
    r = p.D * p.kappa1 / (p.mu * k2g * p.chi)
    v_scale = math.sqrt(p.chi / (p.mu * k2g))
    x_mag = math.sqrt(p.chi * p.mu * k2g) / p.D
    x_sign = 1 if p.chi > 0 else -1
    t_scale = p.mu * k2g * p.chi / p.D
    ends = sorted(x_sign * x_mag * float(x) for x in domain)
    chem_diff = p.epsilon / p.D
    variant = Variant.PARABOLIC_PARABOLIC if p.epsilon > 0 else Variant.PARABOLIC_HYPERBOLIC
    report = ScalingReport(
        r=r,
        v_scale=v_scale,
        x_scale=x_mag,
        x_sign=x_sign,
        t_scale=t_scale,
        chemical_diffusion=chem_diff,
        quadratic_flux=p.epsilon / p.chi,
        domain=tuple(ends),
        orientation_flipped=x_sign < 0,
        normalized=math.isclose(r, 1.0) and (chem_diff == 0 or math.isclose(chem_diff, 1.0)),
    )
    return ModelParams(variant, p.gamma, tuple(ends)), report


@dataclass(frozen=True)
class SpatialGrid:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InvalidParams(f"grid needs n >= 3 nodes, got {self.n}")
        if not self.b - self.a > 0:
            raise InvalidParams(f"empty interval [{self.a}, {self.b}]")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def on(cls, params: ModelParams, n):
        return cls(params.domain[0], params.domain[1], n)

    @property
    def h(self):
        return (self.b - self.a) / (self.n - 1)

    @property
    def length(self):
        return self.b - self.a

    @cached_property
    def x(self):
        nodes = np.linspace(self.a, self.b, self.n)
        nodes.setflags(write=False)
        return nodes

    def normalized(self):
        """Nodes mapped to [0, 1], i / (n - 1), independent of a and b."""
        return np.linspace(0.0, 1.0, self.n)


@dataclass(frozen=True, eq=False)
class Field:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise InvalidParams(
                f"field has shape {vals.shape}, grid expects ({self.grid.n},)"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.grid.n

    def derivative(self):
        return gradient(self.values, self.grid.h)

    def integral(self):
        return trapezoid(self.values, self.grid.h)


@dataclass(frozen=True, eq=False)
class State:
    """Solution snapshot. ``psi`` carries the spatial-average reference of the
    hyperbolic system and is ``None`` for the parabolic-parabolic one."""

    t: float
    u: Field
    v: Field
    psi: float | None = None

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise InvalidParams("u and v must share a grid")
        if self.t < 0:
            raise InvalidParams(f"negative time {self.t}")

    @property
    def grid(self):
        return self.u.grid


def gradient(values, h):
    """Central differences inside, second-order one-sided at the two ends.

    The end rows are written in difference form so that constant data give
    exactly zero.
    """
    f = np.asarray(values, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h)
    out[-1] = (4.0 * (f[-1] - f[-2]) - (f[-1] - f[-3])) / (2.0 * h)
    return out


def trapezoid(values, h):
    f = np.asarray(values, dtype=float)
    return h * (np.sum(f) - 0.5 * (f[0] + f[-1]))


def cole_hopf_forward(c: Field, sigma=0.0, t=0.0) -> Field:
    """v = d/dx ln(exp(sigma t) c).

    The exp(sigma t) factor is spatially constant and drops out of the
    derivative, so it is never formed (it would overflow for large sigma t).
    """
    if np.any(c.values <= 0) or not np.all(np.isfinite(c.values)):
        raise NonPositiveInput("Cole-Hopf transform needs a strictly positive field")
    return Field(c.grid, gradient(np.log(c.values), c.grid.h))


def cole_hopf_inverse(v: Field, anchor_value=1.0) -> Field:
    """Reconstruct c with c(a) = anchor_value from v = (ln c)_x."""
    if not anchor_value > 0:
        raise NonPositiveInput(f"anchor must be positive, got {anchor_value}")
    h = v.grid.h
    vals = v.values
    log_c = np.empty_like(vals)
    log_c[0] = 0.0
    log_c[1:] = np.cumsum(0.5 * h * (vals[1:] + vals[:-1]))
    return Field(v.grid, anchor_value * np.exp(log_c))


@dataclass(frozen=True)
class CompatibilityReport:
    tol: float
    discrepancies: dict
    min_u0: float


def check_compatibility(s: State, bd, tol=DEFAULT_COMPAT_TOL, variant=None) -> CompatibilityReport:
    """Check that initial data match the boundary data at t = s.t and u0 > 0.

    The v endpoints are checked whenever ``bd`` carries beta signals, unless
    ``variant`` is explicitly the hyperbolic one.
    """
    u = s.u.values
    v = s.v.values
    grid = s.grid
    if np.any(~np.isfinite(u)) or np.min(u) <= 0:
        raise NonPositiveInitialDensity(
            f"initial density must be positive everywhere, min u0 = {np.min(u):g}"
        )
    checks = [
        ("u", grid.a, u[0], bd.alpha1.value(s.t)),
        ("u", grid.b, u[-1], bd.alpha2.value(s.t)),
    ]
    check_v = bd.has_beta and (
        variant is None or Variant.parse(variant) is Variant.PARABOLIC_PARABOLIC
    )
    if check_v:
        checks += [
            ("v", grid.a, v[0], bd.beta1.value(s.t)),
            ("v", grid.b, v[-1], bd.beta2.value(s.t)),
        ]
    violations = []
    discrepancies = {}
    for name, x, value, expected in checks:
        gap = abs(float(value) - float(expected))
        discrepancies[f"{name}({x:g})"] = gap
        if not gap <= tol:
            violations.append(
                dict(field=name, x=x, value=float(value), expected=float(expected), tol=tol)
            )
    if violations:
        raise IncompatibleData(violations)
    return CompatibilityReport(tol=tol, discrepancies=discrepancies, min_u0=float(np.min(u)))
