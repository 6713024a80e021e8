"""Method-of-lines time stepping for the two chemotaxis-growth systems.

Parabolic-parabolic::

    u_t = u_xx + (u v)_x + u (1 - u)
    v_t = v_xx + (v^2)_x + (u^gamma)_x        Dirichlet data on u and v

Parabolic-hyperbolic::

    u_t = u_xx + (u v)_x + u (1 - u)
    v_t = (u^gamma)_x                         Dirichlet data on u only

Diffusion is treated implicitly (one tridiagonal solve per diffusing field),
everything else explicitly. The hyperbolic v update uses the time-averaged
flux (u^n)^gamma / 2 + (u^{n+1})^gamma / 2 in a conservative node-centred
form whose trapezoid-weighted sum telescopes to the endpoint values, so the
discrete mean of v - psi is preserved.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics
from .errors import (
    ChemolabError,
    InvalidParams,
    PositivityLost,
    StepUnstable,
)
from .model import (
    Field, ModelParams, SpatialGrid, State, check_compatibility, gradient, trapezoid,
)
from .profiles import (
    BoundaryData,
    ReferenceProfileSample,
    Verdict,
    alpha_profile,
    ba_integrability_check,
    beta_profile,
)
from .scenario import FluxStencil, NumericsConfig, Scenario, Scheme


@dataclass(frozen=True)
class StepReport:
    t_new: float
    max_u: float
    min_u: float
    cfl_used: float
    linear_solve_residual: float


# -- spatial operators -------------------------------------------------------

def central_divergence(F, h):
    """(F_{i+1} - F_{i-1}) / 2h at interior nodes; zero at the two ends."""
    out = np.zeros_like(F)
    out[1:-1] = (F[2:] - F[:-2]) / (2.0 * h)
    return out


def conservative_divergence(F, h, stencil=FluxStencil.CENTRAL, velocity=None):
    """Node-centred divergence built from interface fluxes.

    Interior cells have width h, the two end cells h/2, matching trapezoid
    weights: h * sum(w_i D_i) == F[-1] - F[0] for any interface fluxes.
    With central interface fluxes the interior rows coincide with the
    central stencil; the end rows reduce to first-order one-sided differences.
    """
    if stencil is FluxStencil.CENTRAL:
        face = 0.5 * (F[1:] + F[:-1])
    else:
        c = -0.5 * (velocity[1:] + velocity[:-1])
        face = np.where(c >= 0, F[:-1], F[1:])
    out = np.empty_like(F)
    out[0] = 2.0 * (face[0] - F[0]) / h
    out[1:-1] = (face[1:] - face[:-1]) / h
    out[-1] = 2.0 * (F[-1] - face[-1]) / h
    return out


def balanced_divergence(F, h, length):
    """Second-order F_x (central inside, one-sided at the ends) plus a uniform
    shift that makes its trapezoid integral equal F[-1] - F[0] exactly.

    The shift is the O(h^2) quadrature defect of the one-sided end rows
    spread over the interval, so accuracy is unchanged.
    """
    D = gradient(F, h)
    return D + ((F[-1] - F[0]) - trapezoid(D, h)) / length


def odd_even_damping(f, h, coeff):
    """Conservative fourth-difference dissipation, -coeff * delta^4 f inside.

    Interface fluxes -coeff * h * (w_{i+1} - w_i) with w the undivided
    second difference; the two end faces carry no flux, so the
    trapezoid-weighted sum vanishes. The sawtooth mode (-1)^i, which central
    differences cannot see, decays at rate 16*coeff; smooth data are
    perturbed at O(h^4) inside and O(h^3) next to the ends.
    """
    out = np.zeros_like(f)
    if f.size < 5:
        return out
    w = f[2:] - 2.0 * f[1:-1] + f[:-2]          # nodes 1..n-2
    face = np.zeros(f.size - 1)                  # faces 1/2 .. n-3/2
    face[1:-1] = -coeff * h * np.diff(w)
    out[1:-1] = (face[1:] - face[:-1]) / h
    return out


def laplacian(f, h):
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    return out


def _implicit_banded(n, r):
    """Banded storage of I - dt*D2 with identity rows at both ends."""
    ab = np.zeros((3, n))
    ab[1, :] = 1.0 + 2.0 * r
    ab[0, 2:] = -r
    ab[2, :-2] = -r
    ab[1, 0] = ab[1, -1] = 1.0
    return ab


def _banded_residual(ab, x, rhs):
    ax = ab[1] * x
    ax[:-1] += ab[0, 1:] * x[1:]
    ax[1:] += ab[2, :-1] * x[:-1]
    return float(np.max(np.abs(ax - rhs)))


def diffusion_update(f, explicit_rate, dt, h, left, right, scheme=Scheme.IMEX):
    """Advance f_t = f_xx + explicit_rate by one step with Dirichlet ends.

    Works on the increment d = f_new - f so that a steady state (zero
    right-hand side, boundary values unchanged) is reproduced bit for bit.
    Returns ``(f_new, residual)``; the residual is that of the linear solve
    (zero for the explicit scheme).
    """
    rhs = dt * (laplacian(f, h) + explicit_rate)
    rhs[0] = left - f[0]
    rhs[-1] = right - f[-1]
    if scheme is Scheme.FULLY_EXPLICIT:
        delta, residual = rhs, 0.0
    else:
        ab = _implicit_banded(f.size, dt / (h * h))
        delta = solve_banded((1, 1), ab, rhs, check_finite=False)
        residual = _banded_residual(ab, delta, rhs)
    new = f + delta
    # Dirichlet values are imposed exactly, not up to round-off of f + delta
    new[0] = left
    new[-1] = right
    return new, residual


def stable_dt(u, v, h, gamma, scheme=Scheme.IMEX, hyperbolic=False, damping=0.0):
    """Largest step allowed by the explicit parts of the scheme.

    Advection speed bound 2|v| + sqrt(gamma u^gamma) (characteristic speeds
    of the transport part), reaction bound 2 / max|1 - 2u|, and h^2/2 for
    explicit diffusion.
    """
    speed = float(np.max(2.0 * np.abs(v) + np.sqrt(gamma * np.abs(u) ** gamma)))
    limits = [h / speed if speed > 0 else math.inf]
    rate = float(np.max(np.abs(1.0 - 2.0 * u)))
    limits.append(2.0 / rate if rate > 0 else math.inf)
    if scheme is Scheme.FULLY_EXPLICIT:
        limits.append(0.5 * h * h)
    if hyperbolic and damping > 0:
        limits.append(0.125 / damping)
    return min(limits)


def _finish(grid, t_new, u_new, v_new, psi_new, dt, u_old, v_old, gamma, cfg, residual, hyperbolic):
    finite = bool(np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new)))
    ok = np.isfinite(u_new)
    min_u = float(np.min(u_new[ok])) if np.any(ok) else math.nan
    report = StepReport(
        t_new=t_new,
        max_u=float(np.max(u_new)) if finite else math.inf,
        min_u=min_u,
        cfl_used=dt / stable_dt(u_old, v_old, grid.h, gamma, cfg.scheme, hyperbolic,
                               cfg.v_damping),
        linear_solve_residual=residual,
    )
    if not finite:
        attempted = State(t_new, Field(grid, u_new), Field(grid, v_new), psi_new)
        raise StepUnstable(f"non-finite values at t={t_new:.6g}", state=attempted, report=report)
    attempted = State(t_new, Field(grid, u_new), Field(grid, v_new), psi_new)
    if min_u <= cfg.positivity_floor:
        raise PositivityLost(
            f"min u = {min_u:.3e} <= {cfg.positivity_floor:g} at t={t_new:.6g}",
            state=attempted, report=report,
        )
    return attempted, report


def _u_update(s, bd, gamma, cfg, t_new, src_u):
    grid = s.grid
    u, v = s.u.values, s.v.values
    rate = central_divergence(u * v, grid.h) + u * (1.0 - u)
    if src_u is not None:
        rate = rate + src_u
    return diffusion_update(
        u, rate, cfg.dt, grid.h,
        float(bd.alpha1.value(t_new)), float(bd.alpha2.value(t_new)), cfg.scheme,
    )


def step_pp(s: State, bd: BoundaryData, params: ModelParams, cfg: NumericsConfig, source=None):
    """One step of the parabolic-parabolic system; returns ``(State, StepReport)``."""
    if params.hyperbolic:
        raise InvalidParams("step_pp called with the hyperbolic variant")
    grid = s.grid
    dt, h, g = cfg.dt, grid.h, params.gamma
    t_new = s.t + dt
    src_u = src_v = None
    if source is not None:
        src_u, src_v = source(grid, s.t)
    u, v = s.u.values, s.v.values
    u_new, res_u = _u_update(s, bd, g, cfg, t_new, src_u)
    rate_v = central_divergence(v * v, h) + central_divergence(u ** g, h)
    if src_v is not None:
        rate_v = rate_v + src_v
    v_new, res_v = diffusion_update(
        v, rate_v, dt, h, float(bd.beta1.value(t_new)), float(bd.beta2.value(t_new)), cfg.scheme,
    )
    return _finish(grid, t_new, u_new, v_new, None, dt, u, v, g, cfg, max(res_u, res_v), False)


def step_ph(s: State, bd: BoundaryData, params: ModelParams, cfg: NumericsConfig, source=None):
    """One step of the parabolic-hyperbolic system; returns ``(State, StepReport)``.

    ``s.psi`` is advanced by the trapezoid increment of
    (alpha_2^gamma - alpha_1^gamma) / (b - a), evaluated on the endpoint
    values of u that the v update actually sees.
    """
    if not params.hyperbolic:
        raise InvalidParams("step_ph called with the parabolic-parabolic variant")
    grid = s.grid
    dt, h, g, L = cfg.dt, grid.h, params.gamma, grid.length
    t_new = s.t + dt
    src_u = src_v = None
    if source is not None:
        src_u, src_v = source(grid, s.t)
    u, v = s.u.values, s.v.values
    u_new, residual = _u_update(s, bd, g, cfg, t_new, src_u)
    flux = 0.5 * (u ** g + u_new ** g)
    if cfg.hyperbolic_flux is FluxStencil.CENTRAL:
        rate_v = balanced_divergence(flux, h, L)
    else:
        rate_v = conservative_divergence(flux, h, cfg.hyperbolic_flux, velocity=v)
    if cfg.v_damping:
        rate_v = rate_v + odd_even_damping(v, h, cfg.v_damping)
    psi = s.psi if s.psi is not None else trapezoid(v, h) / L
    psi_new = psi + dt * (flux[-1] - flux[0]) / L
    if src_v is not None:
        rate_v = rate_v + src_v
        psi_new += dt * trapezoid(src_v, h) / L
    v_new = v + dt * rate_v
    return _finish(grid, t_new, u_new, v_new, psi_new, dt, u, v, g, cfg, residual, True)


def step(s, bd, params, cfg, source=None):
    if params.hyperbolic:
        return step_ph(s, bd, params, cfg, source)
    return step_pp(s, bd, params, cfg, source)


# -- whole runs ----------------------------------------------------------------

class RunStatus(str, enum.Enum):
    COMPLETED = "Completed"
    POSITIVITY_LOST = "PositivityLost"
    STEP_UNSTABLE = "StepUnstable"
    REJECTED = "Rejected"


@dataclass
class RunResult:
    status: RunStatus
    records: list
    final_state: State | None
    metadata: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self):
        return self.status is RunStatus.COMPLETED


def initial_state(sc: Scenario) -> State:
    grid = sc.grid
    t0 = 0.0
    alpha0 = alpha_profile(sc.boundary, grid, t0).values
    if sc.model.hyperbolic or not sc.boundary.has_beta:
        v_ref = np.zeros(grid.n)
    else:
        v_ref = beta_profile(sc.boundary, grid, t0).values
    u0 = Field(grid, sc.initial_u.evaluate(grid, alpha0))
    v0 = Field(grid, sc.initial_v.evaluate(grid, v_ref))
    psi = trapezoid(v0.values, grid.h) / grid.length if sc.model.hyperbolic else None
    return State(t0, u0, v0, psi)


def reference_sample(sc_or_bd, grid, t, hyperbolic, psi=None):
    bd = sc_or_bd.boundary if isinstance(sc_or_bd, Scenario) else sc_or_bd
    alpha = alpha_profile(bd, grid, t)
    if hyperbolic:
        return ReferenceProfileSample(t=t, alpha=alpha, psi=psi)
    return ReferenceProfileSample(t=t, alpha=alpha, beta=beta_profile(bd, grid, t))


def validate_scenario(sc: Scenario):
    """Hypothesis checks done before stepping. Returns (state, theory flags).

    Raises a ChemolabError subclass when the run must be rejected.
    """
    params, cfg, bd = sc.model, sc.numerics, sc.boundary
    if not params.hyperbolic and not bd.has_beta:
        raise InvalidParams("the parabolic-parabolic system needs beta1 and beta2")
    bd.check_positive(cfg.t_end, cfg.dt / sc.diagnostics.bound_oversampling)
    s0 = initial_state(sc)
    check_compatibility(s0, bd, sc.diagnostics.compat_tol, variant=params.variant)
    limit = sc.numerics.cfl_safety * stable_dt(
        s0.u.values, s0.v.values, sc.grid.h, params.gamma, cfg.scheme, params.hyperbolic,
        cfg.v_damping,
    )
    if cfg.dt > limit:
        raise InvalidParams(
            f"dt = {cfg.dt:g} exceeds the stability limit {limit:.4g} for n = {cfg.n}"
        )
    ba = ba_integrability_check(bd, cfg.t_end, cfg.dt)
    flags = {
        "outside_theory": bool(params.outside_theory),
        "ba_verdict": ba.verdict.value,
        "ba_integrals": ba.integrals,
        "ba_tails": ba.tails,
    }
    return s0, flags


def simulate(sc: Scenario, sinks=()) -> RunResult:
    """Run a scenario to t_end, recording diagnostics every ``cadence`` steps.

    Step failures end the run with the matching status; they are never raised.
    Each sink is called with every DiagnosticsRecord as it is produced.
    """
    started = time.perf_counter()
    cfg, params, bd = sc.numerics, sc.model, sc.boundary
    grid = sc.grid
    meta = {
        "scenario": sc.name,
        "variant": params.variant.value,
        "gamma": params.gamma,
        "grid": {"a": grid.a, "b": grid.b, "n": grid.n, "h": grid.h},
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "scheme": cfg.scheme.value,
        "cadence": sc.diagnostics.cadence,
    }
    try:
        state, flags = validate_scenario(sc)
    except ChemolabError as exc:
        meta.update(wall_time=time.perf_counter() - started, steps=0, error=str(exc))
        return RunResult(RunStatus.REJECTED, [], None, meta, str(exc))
    meta.update(flags)
    if params.outside_theory:
        meta["warnings"] = ["OutsideTheory: hyperbolic system with 1 < gamma < 2"]

    n_steps = cfg.n_steps
    cadence = sc.diagnostics.cadence
    record_steps = sorted(set(range(0, n_steps + 1, cadence)) | {n_steps})
    bounds = bd.alpha_bounds(
        n_steps * cfg.dt, cfg.dt / sc.diagnostics.bound_oversampling,
        extra_times=[k * cfg.dt for k in record_steps],
    )
    meta["alpha_bounds"] = {
        "alpha1_min": bounds.alpha1_min,
        "alpha2_min": bounds.alpha2_min,
        "alpha_min": bounds.alpha_min,
        "alpha_max": bounds.alpha_max,
        "resolution": bounds.resolution,
    }

    forcing = diagnostics.forcing_function(bd, params)
    records = []
    ledger = diagnostics.LedgerAccumulator()

    def emit(st):
        ref = reference_sample(bd, grid, st.t, params.hyperbolic, st.psi)
        rec = diagnostics.record_from_state(
            st, ref, bd, params, bounds,
            forcing=float(forcing(st.t)),
            forcing_integral=ledger.integral,
            ledger=ledger,
        )
        records.append(rec)
        for sink in sinks:
            sink(rec)

    status, message = RunStatus.COMPLETED, ""
    emit(state)
    f_prev = float(forcing(0.0))
    min_u = float(np.min(state.u.values))
    steps = 0
    next_record = 1
    for k in range(1, n_steps + 1):
        try:
            new_state, rep = step(state, bd, params, cfg, sc.source)
        except PositivityLost as exc:
            status, message = RunStatus.POSITIVITY_LOST, str(exc)
            meta["failure_min_u"] = exc.report.min_u
            break
        except StepUnstable as exc:
            status, message = RunStatus.STEP_UNSTABLE, str(exc)
            break
        min_u = min(min_u, rep.min_u)
        # pin the clock to k*dt so sample times do not drift
        state = State(k * cfg.dt, new_state.u, new_state.v, new_state.psi)
        f_new = float(forcing(state.t))
        ledger.advance(0.5 * cfg.dt * (f_prev + f_new))
        f_prev = f_new
        steps = k
        if next_record < len(record_steps) and record_steps[next_record] == k:
            emit(state)
            next_record += 1

    meta.update(
        status=status.value,
        steps=steps,
        min_u=min_u,
        wall_time=time.perf_counter() - started,
    )
    if message:
        meta["error"] = message
    return RunResult(status, records, state, meta, message)
