"""Functionals used in the stability analysis, evaluated on solver states.

All quadrature is the composite trapezoid rule on the solver grid and all
derivatives use the same stencil as :func:`chemolab.model.gradient`, so the
discrete identities the solver preserves are seen exactly here.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import brentq

from .errors import GridMismatch, InvalidGamma, NonPositiveInput
from .lemmas import power_gap
from .model import Field, State, gradient, trapezoid
from .profiles import forcing_X, forcing_Y


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2_u_dev: float
    l2_v_dev: float
    h1_u_dev: float
    h1_v_dev: float
    entropy: float
    sqrt_u_dissipation: float
    v_dissipation: float
    weighted_u_dissipation: float
    forcing: float
    vtilde_mean: float
    H: float | None
    J: float | None
    K: float | None
    ledger_lhs: float
    ledger_rhs: float
    forcing_integral: float = 0.0

    @property
    def h1_total(self):
        return self.h1_u_dev + self.h1_v_dev


FIELD_NAMES = [f.name for f in fields(DiagnosticsRecord)]


# -- entropies -----------------------------------------------------------------

def _entropy_e1_density(u, alpha):
    # (u ln u - u) - (a ln a - a) - ln a (u - a) == u ln(u/a) - (u - a)
    return u * np.log(u / alpha) - (u - alpha)


def entropy_e1(u: Field, alpha: Field) -> float:
    uv, av = u.values, alpha.values
    if np.any(uv <= 0) or np.any(av <= 0):
        raise NonPositiveInput("E1 needs u > 0 and alpha > 0")
    return float(trapezoid(_entropy_e1_density(uv, av), u.grid.h))


def _entropy_e2_density(u, alpha, gamma):
    # u^g - a^g - g a^{g-1}(u - a) == a^g * [rho^g - 1 - g(rho - 1)],  rho = u/a
    return alpha ** gamma * power_gap(u / alpha, gamma) / (gamma - 1.0)


def entropy_e2(u: Field, alpha: Field, gamma) -> float:
    if not gamma > 1:
        raise InvalidGamma(f"E2 is defined for gamma > 1, got {gamma}")
    uv, av = u.values, alpha.values
    if np.any(uv < 0) or np.any(av <= 0):
        raise NonPositiveInput("E2 needs u >= 0 and alpha > 0")
    return float(trapezoid(_entropy_e2_density(uv, av, gamma), u.grid.h))


def n1_ratio(u: Field, alpha: Field, gamma) -> float:
    """trapezoid(|u - alpha|) / (E2 + 1); bounded by a constant when alpha is."""
    dev = np.abs(u.values - alpha.values)
    return float(trapezoid(dev, u.grid.h) / (entropy_e2(u, alpha, gamma) + 1.0))


def entropy(u: Field, alpha: Field, gamma) -> float:
    """E1 for gamma == 1, E2 otherwise."""
    return entropy_e1(u, alpha) if gamma == 1 else entropy_e2(u, alpha, gamma)


# -- deviations and norms ------------------------------------------------------

def _check_pair(s: State, profile):
    if s.grid != profile.grid:
        raise GridMismatch(f"state grid {s.grid} differs from profile grid {profile.grid}")
    if not math.isclose(s.t, profile.t, rel_tol=1e-12, abs_tol=1e-12):
        raise GridMismatch(f"state time {s.t} differs from profile time {profile.t}")


def deviations(s: State, profile):
    """(u - alpha, v - beta) or (u - alpha, v - psi)."""
    _check_pair(s, profile)
    return s.u.values - profile.alpha.values, s.v.values - profile.v_reference()


def l2_norm(f, h):
    return math.sqrt(trapezoid(np.square(f), h))


def deviation_norms(s: State, profile):
    """Returns (l2_u, h1_u, l2_v, h1_v) with H1 = sqrt(L2^2 + |d/dx|_L2^2)."""
    ut, vt = deviations(s, profile)
    h = s.grid.h
    l2u, l2v = l2_norm(ut, h), l2_norm(vt, h)
    h1u = math.sqrt(l2u ** 2 + trapezoid(gradient(ut, h) ** 2, h))
    h1v = math.sqrt(l2v ** 2 + trapezoid(gradient(vt, h) ** 2, h))
    return l2u, h1u, l2v, h1v


def dissipation_terms(s: State, profile, gamma):
    """(|(sqrt u)_x|^2, |vtilde_x|^2, int u^{gamma-2} |utilde_x|^2), all in L2."""
    u = s.u.values
    if np.any(u <= 0):
        raise NonPositiveInput("dissipation terms need u > 0")
    ut, vt = deviations(s, profile)
    h = s.grid.h
    u_x = gradient(u, h)
    sqrt_u = trapezoid(u_x ** 2 / (4.0 * u), h)
    v_diss = trapezoid(gradient(vt, h) ** 2, h)
    weight = u ** (gamma - 2.0) if gamma != 2 else 1.0
    weighted = trapezoid(weight * gradient(ut, h) ** 2, h)
    return float(sqrt_u), float(v_diss), float(weighted)


def vtilde_mass(v: Field, psi) -> float:
    """Spatial mean of v - psi."""
    return float(trapezoid(v.values - psi, v.grid.h) / v.grid.length)


# -- damped-equation quantities (hyperbolic, gamma >= 2) -----------------------

@dataclass(frozen=True)
class DampedQuantities:
    H: float
    J: float
    K: float
    chi: float


def damped_quantities(s: State, profile, bd, gamma, alpha_min, alpha_max, aux=None):
    """H, J and K of the damped equation for vtilde_x.

    ``alpha_min`` / ``alpha_max`` are the run-level sampled bounds of the u
    boundary data; K is only a Lyapunov-type quantity when every profile value
    lies between them. ``aux`` is accepted for interface compatibility and
    ignored: all three quantities are instantaneous.
    """
    if not gamma >= 2:
        raise InvalidGamma(f"H/J/K are defined for gamma >= 2, got {gamma}")
    ut, vt = deviations(s, profile)
    h = s.grid.h
    alpha = profile.alpha.values
    ut_x = gradient(ut, h)
    vt_x = gradient(vt, h)
    ux_sq = trapezoid(ut_x ** 2, h)
    H = trapezoid(vt_x ** 2, h) / (2.0 * gamma) - trapezoid(alpha ** (gamma - 1.0) * ut * vt_x, h)
    Y = float(forcing_Y(bd, s.t))
    if gamma <= 4:
        J = trapezoid((ut * ut_x) ** 2, h) + ux_sq + Y
    else:
        J = trapezoid(np.abs(ut) ** (gamma - 1.0) * ut_x ** 2, h) + ux_sq + Y
    chi = (gamma - 1.0) * alpha_max ** (2.0 * gamma - 2.0) * alpha_min ** (2.0 - gamma)
    e2 = entropy_e2(s.u, profile.alpha, gamma)
    K = (2.0 * chi * e2 + H + chi * trapezoid(vt ** 2, h)
         + alpha_min ** gamma / (4.0 * alpha_max ** 2) * ux_sq)
    return DampedQuantities(float(H), float(J), float(K), float(chi))


# -- per-sample records and the Gronwall ledger --------------------------------

def forcing_function(bd, params):
    """X(t) for the parabolic-parabolic system, Y(t) for the hyperbolic one."""
    if params.hyperbolic:
        return lambda t: forcing_Y(bd, t)
    return lambda t: forcing_X(bd, t)


class LedgerAccumulator:
    """Running time integral of the forcing and the first ledger value."""

    def __init__(self):
        self.integral = 0.0
        self.g0 = None

    def advance(self, increment):
        self.integral += increment


def gronwall_quantity(entropy_value, l2_v_dev):
    return 2.0 * entropy_value + l2_v_dev ** 2


def record_from_state(st: State, ref, bd, params, bounds, *, forcing, forcing_integral,
                      ledger=None) -> DiagnosticsRecord:
    g = params.gamma
    l2u, h1u, l2v, h1v = deviation_norms(st, ref)
    ent = entropy(st.u, ref.alpha, g)
    sq, vd, wd = dissipation_terms(st, ref, g)
    if params.hyperbolic:
        mean = vtilde_mass(st.v, ref.psi)
    else:
        mean = float(trapezoid(st.v.values - ref.beta.values, st.grid.h) / st.grid.length)
    H = J = K = None
    if params.hyperbolic and g >= 2:
        dq = damped_quantities(st, ref, bd, g, bounds.alpha_min, bounds.alpha_max)
        H, J, K = dq.H, dq.J, dq.K
    G = gronwall_quantity(ent, l2v)
    if ledger is not None and ledger.g0 is None:
        ledger.g0 = G
    g0 = ledger.g0 if ledger is not None else G
    # right-hand side at unit constant; gronwall_ledger fits the constant
    rhs = (g0 + forcing_integral) * math.exp(forcing_integral)
    return DiagnosticsRecord(
        t=float(st.t), l2_u_dev=l2u, l2_v_dev=l2v, h1_u_dev=h1u, h1_v_dev=h1v,
        entropy=ent, sqrt_u_dissipation=sq, v_dissipation=vd, weighted_u_dissipation=wd,
        forcing=float(forcing), vtilde_mean=mean, H=H, J=J, K=K,
        ledger_lhs=G, ledger_rhs=rhs, forcing_integral=float(forcing_integral),
    )


@dataclass
class LedgerReport:
    c_star: float
    required: np.ndarray     # smallest constant needed at each sample
    margins: np.ndarray      # rhs - lhs at c_star
    violations: list         # sample indices no finite constant can cover
    times: np.ndarray
    tol: float

    @property
    def finite(self):
        return math.isfinite(self.c_star)

    def holds(self, C, lhs, integral, g0):
        rhs = (g0 + C * integral) * np.exp(C * integral)
        return bool(np.all(lhs <= rhs + self.tol))


def gronwall_ledger(series, C=None, tol=1e-10) -> LedgerReport:
    """Fit the smallest C with G(t) <= (G(0) + C I(t)) exp(C I(t)) on every sample.

    G = 2E + |vtilde|^2 (``ledger_lhs``) and I(t) the running integral of the
    forcing (``forcing_integral``). Samples with G(t) <= G(0) + tol need no
    constant; a sample with G(t) above that and I(t) = 0 cannot be covered by
    any constant and is reported as a violation. When ``C`` is given the
    margins are evaluated at that constant instead of the fitted one.
    """
    G = np.array([r.ledger_lhs for r in series], dtype=float)
    I = np.array([r.forcing_integral for r in series], dtype=float)
    times = np.array([r.t for r in series], dtype=float)
    g0 = G[0]
    required = np.zeros_like(G)
    violations = []
    for k in range(G.size):
        if G[k] <= g0 + tol:
            continue
        if I[k] <= 0:
            required[k] = math.inf
            violations.append(k)
            continue
        target = G[k]

        def gap(c, ik=I[k]):
            return (g0 + c * ik) * math.exp(c * ik) - target

        hi = 1.0
        while gap(hi) < 0:
            hi *= 2.0
        required[k] = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12)
    c_star = float(np.max(required)) if required.size else 0.0
    c_eval = c_star if C is None else float(C)
    if math.isfinite(c_eval):
        margins = (g0 + c_eval * I) * np.exp(c_eval * I) - G
    else:
        margins = np.full_like(G, math.inf)
    return LedgerReport(c_star, required, margins, violations, times, tol)


gronwall_ledger_pp = gronwall_ledger


# -- CSV -------------------------------------------------------------------------

def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_NAMES)
        for r in records:
            w.writerow([_fmt(getattr(r, name)) for name in FIELD_NAMES])


def read_records_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(DiagnosticsRecord(**{
                k: (None if row[k] == "" else float(row[k])) for k in FIELD_NAMES if k in row
            }))
    return out
