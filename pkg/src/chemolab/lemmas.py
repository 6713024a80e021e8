"""Elementary inequalities behind the entropy estimates, as residual functions.

Every inequality is evaluated as ``lhs`` and ``rhs = lhs + gap`` where the
gap ``rhs - lhs`` is computed from an algebraically equivalent form that
avoids cancellation between large powers. ``residual = rhs - lhs`` is then
taken literally from those two floats, so near the equality loci it is exact
zero or carries the sign of the gap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

RHO_CAP = 1e6
S_CAP = 64.0


def _pm1(rho, p):
    """rho**p - 1, accurate near rho = 1; 0**p = 0 for p > 0."""
    d = rho - 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.expm1(p * np.log1p(np.where(np.abs(d) < 0.5, d, 0.0)))
        far = np.power(rho, p) - 1.0
    return np.where(np.abs(d) < 0.5, near, far)


def power_gap(rho, s):
    """rho**s - 1 - s*(rho - 1), which is >= 0 for rho >= 0 and s >= 1."""
    rho = np.asarray(rho, dtype=float)
    return _pm1(rho, s) - s * (rho - 1.0)


def t2_root(s):
    """rho_* = (1 + 1/s)**(1/(s-1)), the double root of the T2 gap."""
    with np.errstate(over="ignore"):
        return np.exp(np.log1p(1.0 / np.asarray(s, dtype=float)) / (np.asarray(s) - 1.0))


def _t1(rho, s):
    lhs = (rho - 1.0) ** 2
    # rho^s - 1 - s(rho-1) - (rho-1)^2 == rho^2 (rho^{s-2} - 1) - (s-2)(rho-1)
    gap = rho ** 2 * _pm1(rho, s - 2.0) - (s - 2.0) * (rho - 1.0)
    return lhs, gap


def _t2(rho, s):
    lhs = rho - 1.0
    # With rho_* as above, K = rho_*^s = (1+1/s)^{s/(s-1)} and the gap equals
    # K * [t^s - 1 - s(t-1)] at t = rho/rho_*.
    root = t2_root(s)
    with np.errstate(over="ignore", invalid="ignore"):
        K = np.exp(s / (s - 1.0) * np.log1p(1.0 / s))
        gap = K * power_gap(rho / root, s)
    gap = np.where(np.isinf(K), np.inf, gap)
    return lhs, gap


def _t3(rho, s):
    lhs = np.abs(rho - 1.0) ** s
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # for rho >= 2: rho^s - (rho-1)^s = -rho^s expm1(s log1p(-1/rho))
        big = np.maximum(rho, 2.0)
        diff = -np.power(big, s) * np.expm1(s * np.log1p(-1.0 / big))
        far = diff - 1.0 - s * (rho - 1.0)
    near = power_gap(rho, s) - lhs
    gap = np.where(rho >= 2.0, far, near)
    return lhs, gap


def _t4(rho, s):
    lhs = s * (rho - 1.0)
    return lhs, power_gap(rho, s)


def _t5(rho, s):
    lhs = np.abs(_pm1(rho, s))
    with np.errstate(divide="ignore", invalid="ignore"):
        # |rho-1| - |rho^s-1| == rho |expm1((s-1) ln rho)| for rho > 0, s <= 1
        gap = rho * np.abs(np.expm1((s - 1.0) * np.log(rho)))
    gap = np.where(rho == 0.0, np.where(s == 0.0, 1.0, 0.0), gap)
    return lhs, gap


@dataclass(frozen=True)
class LemmaSpec:
    name: str
    s_lo: float
    s_hi: float
    lo_open: bool
    statement: str
    func: object = field(repr=False)

    def admits(self, rho, s):
        rho = np.asarray(rho, dtype=float)
        s = np.asarray(s, dtype=float)
        ok_s = (s > self.s_lo) if self.lo_open else (s >= self.s_lo)
        return (rho >= 0) & ok_s & (s <= self.s_hi) & np.isfinite(rho)


LEMMAS = {
    "T1": LemmaSpec("T1", 2.0, math.inf, False, "(rho-1)^2 <= rho^s - 1 - s(rho-1), s >= 2", _t1),
    "T2": LemmaSpec("T2", 1.0, 2.0, True,
                    "rho-1 <= rho^s - 1 - s(rho-1) + (s-1)(1+1/s)^{s/(s-1)} - s, 1 < s <= 2", _t2),
    "T3": LemmaSpec("T3", 2.0, math.inf, False, "|rho-1|^s <= rho^s - 1 - s(rho-1), s >= 2", _t3),
    "T4": LemmaSpec("T4", 1.0, math.inf, False, "s(rho-1) <= rho^s - 1, s >= 1", _t4),
    "T5": LemmaSpec("T5", 0.0, 1.0, False, "|rho^s - 1| <= |rho-1|, 0 <= s <= 1", _t5),
}


@dataclass(frozen=True)
class InequalityResidual:
    lhs: float
    rhs: float
    residual: float
    at: tuple


def evaluate(which, rho, s):
    """Vectorized (lhs, rhs, residual) for lemma ``which`` (no domain check)."""
    spec = LEMMAS[which]
    rho, s = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(s, dtype=float))
    lhs, gap = spec.func(rho, s)
    with np.errstate(invalid="ignore", over="ignore"):
        rhs = lhs + gap
        residual = rhs - lhs
    return lhs, rhs, residual


def naive(which, rho, s):
    """Direct transcription of both sides, for cross-checking ``evaluate``."""
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    p = np.power(rho, s)
    if which == "T1":
        return (rho - 1) ** 2, p - 1 - s * (rho - 1)
    if which == "T2":
        return rho - 1, p - 1 - s * (rho - 1) + (s - 1) * (1 + 1 / s) ** (s / (s - 1)) - s
    if which == "T3":
        return np.abs(rho - 1) ** s, p - 1 - s * (rho - 1)
    if which == "T4":
        return s * (rho - 1), p - 1
    if which == "T5":
        return np.abs(p - 1), np.abs(rho - 1)
    raise KeyError(which)


def _scalar(which, rho, s):
    spec = LEMMAS[which]
    if not bool(spec.admits(rho, s)):
        raise DomainError(f"{which} needs {spec.statement.split(',')[-1].strip()} and rho >= 0; "
                          f"got rho={rho}, s={s}")
    lhs, rhs, res = evaluate(which, rho, s)
    return InequalityResidual(float(lhs), float(rhs), float(res), (float(rho), float(s)))


def ineq_T1(rho, s):
    return _scalar("T1", rho, s)


def ineq_T2(rho, s):
    return _scalar("T2", rho, s)


def ineq_T3(rho, s):
    return _scalar("T3", rho, s)


def ineq_T4(rho, s):
    return _scalar("T4", rho, s)


def ineq_T5(rho, s):
    return _scalar("T5", rho, s)


def tolerance(rho, s):
    """-1e-12 absolute up to rho = 1e3, relative rho^s * 1e-15 beyond."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(over="ignore"):
        rel = np.power(np.maximum(rho, 1.0), s) * 1e-15
    return np.where(rho <= 1e3, 1e-12, np.maximum(1e-12, rel))


@dataclass
class FuzzReport:
    lemma: str
    samples: int
    seed: int
    min_residual: float
    argmin: tuple
    violations: int
    witnesses: dict          # locus -> max |residual| on that locus
    witness_ok: dict
    s_range: tuple
    rho_max: float

    @property
    def passed(self):
        return self.violations == 0 and all(self.witness_ok.values())


def _s_domain(spec, rho_max, s_range):
    hi = min(S_CAP, 300.0 / max(1.0, math.log10(max(rho_max, 10.0))))
    lo_s = spec.s_lo
    hi_s = min(spec.s_hi, hi)
    if s_range is not None:
        lo_s, hi_s = max(lo_s, s_range[0]), min(hi_s, s_range[1])
    return lo_s, hi_s


def _witness_points(which, spec, rng, lo_s, hi_s, rho_max, count):
    s = rng.uniform(lo_s, hi_s, count)
    if spec.lo_open:
        s = np.where(s <= spec.s_lo, hi_s, s)
    rho = 10.0 ** rng.uniform(-6.0, math.log10(rho_max), count)
    loci = {}
    if which != "T2":
        loci["rho=1"] = (np.ones(count), s)
    if which in ("T1", "T3"):
        loci["s=2"] = (np.concatenate([[0.0], rho]), np.full(count + 1, 2.0))
    if which in ("T4", "T5"):
        loci["s=1"] = (np.concatenate([[0.0], rho]), np.full(count + 1, 1.0))
    if which == "T2":
        root = t2_root(s)
        keep = root <= rho_max
        loci["rho=rho*"] = (root[keep], s[keep])
    return loci


def fuzz_lemma(which, samples=100_000, seed=0, rho_max=1e3, log_grid=False, s_range=None,
               witness_count=200):
    """Scan the residual of ``which`` over its domain and report the minimum.

    rho is log-uniform on [1e-6, rho_max] (plus rho = 0), s uniform on the
    lemma's interval capped so that rho_max**s stays finite. ``log_grid``
    replaces random sampling by a tensor grid of about ``samples`` points.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    spec = LEMMAS[which]
    rho_max = min(float(rho_max), RHO_CAP)
    lo_s, hi_s = _s_domain(spec, rho_max, s_range)
    rng = np.random.default_rng(seed)
    if log_grid:
        side = max(2, int(math.isqrt(samples)))
        r = np.concatenate([[0.0], np.logspace(-6, math.log10(rho_max), side)])
        ss = np.linspace(lo_s, hi_s, side)
        if spec.lo_open:
            ss = ss[ss > spec.s_lo] if np.any(ss > spec.s_lo) else np.array([hi_s])
        R, S = np.meshgrid(r, ss)
        rho, s = R.ravel(), S.ravel()
    else:
        rho = 10.0 ** rng.uniform(-6.0, math.log10(rho_max), samples)
        rho[0] = 0.0
        s = rng.uniform(lo_s, hi_s, samples)
        if spec.lo_open:
            s = np.where(s <= spec.s_lo, hi_s, s)
    _, _, res = evaluate(which, rho, s)
    tol = tolerance(rho, s)
    bad = np.isnan(res) | (res < -tol)
    k = int(np.nanargmin(res))

    witnesses, witness_ok = {}, {}
    for locus, (wr, ws) in _witness_points(which, spec, rng, lo_s, hi_s, rho_max,
                                           witness_count).items():
        if wr.size == 0:
            continue
        _, _, wres = evaluate(which, wr, ws)
        witnesses[locus] = float(np.max(np.abs(wres)))
        witness_ok[locus] = bool(np.all(np.abs(wres) <= tolerance(wr, ws)))

    return FuzzReport(
        lemma=which,
        samples=int(rho.size),
        seed=seed,
        min_residual=float(res[k]),
        argmin=(float(rho[k]), float(s[k])),
        violations=int(np.count_nonzero(bad)),
        witnesses=witnesses,
        witness_ok=witness_ok,
        s_range=(lo_s, hi_s),
        rho_max=rho_max,
    )


def verify_all(samples=100_000, seed=0, rho_max=1e3):
    return [fuzz_lemma(name, samples, seed + i, rho_max) for i, name in enumerate(LEMMAS)]
