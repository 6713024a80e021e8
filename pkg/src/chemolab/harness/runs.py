"""Running scenarios and persisting what they produce.

Artifacts of one run, all in its output directory:

* ``diagnostics.csv``: one row per DiagnosticsRecord,
* ``final_state.csv``: columns ``x,u,v,alpha`` plus ``beta`` (parabolic-
  parabolic) or ``psi`` (hyperbolic, constant column),
* ``run.json``: status, message and the metadata collected by ``simulate``.

Floats are written with 17 significant digits so that reloading is exact.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..diagnostics import gronwall_ledger, write_records_csv
from ..errors import InvalidParams, RunFailed
from ..model import Field, SpatialGrid, State, trapezoid
from ..profiles import alpha_profile, beta_profile
from ..solver import RunResult, simulate
from .config import load_scenario, output_dir_for, read_document, resolve, scenario_from_dict, set_path

DEGENERATE_FLOOR = 1e-13


def _g(x):
    return format(float(x), ".17g")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_final_state(sc, state: State, path):
    grid = state.grid
    alpha = alpha_profile(sc.boundary, grid, state.t).values
    hyperbolic = sc.model.hyperbolic
    header = ["x", "u", "v", "alpha", "psi" if hyperbolic else "beta"]
    if hyperbolic:
        last = np.full(grid.n, state.psi)
    else:
        last = beta_profile(sc.boundary, grid, state.t).values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(grid.x, state.u.values, state.v.values, alpha, last):
            w.writerow([_g(v) for v in row])


def load_final_state(path, grid=None, t=None):
    """Rebuild the State stored in ``final_state.csv``.

    ``t`` defaults to the final time recorded in the neighbouring run.json.
    The grid is rebuilt from the first and last x when not given.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    cols = {name: body[:, k] for k, name in enumerate(header)}
    if grid is None:
        grid = SpatialGrid(float(cols["x"][0]), float(cols["x"][-1]), body.shape[0])
    if t is None:
        meta = path.parent / "run.json"
        t = json.loads(meta.read_text())["final_time"] if meta.exists() else 0.0
    psi = float(cols["psi"][0]) if "psi" in cols else None
    return State(float(t), Field(grid, cols["u"]), Field(grid, cols["v"]), psi)


def write_artifacts(sc, result: RunResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(result.records, out / "diagnostics.csv")
    if result.final_state is not None:
        write_final_state(sc, result.final_state, out / "final_state.csv")
    doc = {
        "status": result.status.value,
        "message": result.message,
        "final_time": result.final_state.t if result.final_state is not None else None,
        "records": len(result.records),
        "metadata": result.metadata,
    }
    (out / "run.json").write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")
    return out


def run_scenario(config, out_dir=None, root=None):
    """Load ``config`` (path or bundled name), simulate and persist the run.

    Returns ``(RunResult, output directory)``. Configuration problems raise
    ConfigError; run failures are reported through ``RunResult.status``.
    """
    sc = config if not isinstance(config, (str, Path)) else load_scenario(config)
    result = simulate(sc)
    target = Path(out_dir) if out_dir is not None else output_dir_for(sc, root)
    return result, write_artifacts(sc, result, target)


# -- convergence ---------------------------------------------------------------

@dataclass
class ConvergenceReport:
    grids: list
    reference_n: int
    errors_u: list
    errors_v: list
    orders_u: list
    orders_v: list
    degenerate: bool
    note: str = ""

    def min_order(self):
        vals = [o for o in self.orders_u + self.orders_v if math.isfinite(o)]
        return min(vals) if vals else math.nan

    def rows(self):
        out = []
        for k, n in enumerate(self.grids):
            out.append({
                "n": n,
                "error_u": self.errors_u[k],
                "error_v": self.errors_v[k],
                "order_u": self.orders_u[k - 1] if k else None,
                "order_v": self.orders_v[k - 1] if k else None,
            })
        return out


def _order(coarse, fine):
    if coarse <= DEGENERATE_FLOOR or fine <= DEGENERATE_FLOOR:
        return math.nan
    return math.log2(coarse / fine)


def _completed(sc):
    res = simulate(sc)
    if not res.ok:
        raise RunFailed(f"run at n={sc.numerics.n} ended with {res.status.value}: {res.message}",
                        status=res.status)
    return res.final_state


def convergence_study(scenario, grids, reference_n):
    """Self-convergence of u and v at t_end against a run at ``reference_n``.

    Errors are discrete L2 norms on each coarse grid's nodes, which all lie
    on the reference grid. Orders are log2 of successive error ratios, so the
    grids are expected to halve h from one entry to the next.
    """
    grids = [int(n) for n in grids]
    reference_n = int(reference_n)
    if not grids:
        raise InvalidParams("convergence study needs at least one grid")
    if reference_n < 2 * max(grids) - 1:
        raise InvalidParams(f"reference n={reference_n} must be >= 2*max(grids)-1 = {2 * max(grids) - 1}")
    for n in grids:
        if n < 3 or (reference_n - 1) % (n - 1):
            raise InvalidParams(f"grid n={n} does not nest into the reference n={reference_n}")
    ref = _completed(scenario.with_grid(reference_n))
    eu, ev = [], []
    for n in grids:
        st = _completed(scenario.with_grid(n))
        stride = (reference_n - 1) // (n - 1)
        h = st.grid.h
        eu.append(math.sqrt(trapezoid((st.u.values - ref.u.values[::stride]) ** 2, h)))
        ev.append(math.sqrt(trapezoid((st.v.values - ref.v.values[::stride]) ** 2, h)))
    ou = [_order(a, b) for a, b in zip(eu, eu[1:])]
    ov = [_order(a, b) for a, b in zip(ev, ev[1:])]
    degenerate = max(eu + ev) <= DEGENERATE_FLOOR
    note = f"degenerate: errors below floor {DEGENERATE_FLOOR:g}" if degenerate else ""
    return ConvergenceReport(grids, reference_n, eu, ev, ou, ov, degenerate, note)


# -- sweeps --------------------------------------------------------------------

SWEEP_COLUMNS = ["value", "status", "final_h1", "c_star", "time_to_threshold", "ba_verdict",
                 "message"]


def time_to_threshold(records, fraction):
    """First sample time with H1 deviation below ``fraction`` of the initial one."""
    if not records:
        return None
    h0 = records[0].h1_total
    if h0 == 0:
        return records[0].t
    for r in records:
        if r.h1_total < fraction * h0:
            return r.t
    return None


def summarize(sc, result: RunResult):
    recs = result.records
    c_star = gronwall_ledger(recs).c_star if recs else None
    return {
        "status": result.status.value,
        "final_h1": recs[-1].h1_total if recs else None,
        "c_star": c_star,
        "time_to_threshold": time_to_threshold(recs, sc.diagnostics.threshold_fraction),
        "ba_verdict": result.metadata.get("ba_verdict"),
        "message": result.message,
    }


def _sweep_one(job):
    doc, source_path, axis, value, run_dir = job
    try:
        sc = scenario_from_dict(set_path(doc, axis, value), source_path)
        result = simulate(sc)
        row = summarize(sc, result)
        if run_dir is not None:
            write_artifacts(sc, result, run_dir)
    except Exception as exc:  # a sweep never aborts on one bad variant
        row = {"status": "Error", "final_h1": None, "c_star": None, "time_to_threshold": None,
               "ba_verdict": None, "message": f"{type(exc).__name__}: {exc}"}
    row["value"] = float(value)
    return row


@dataclass
class SweepTable:
    axis: str
    rows: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for row in self.rows:
                w.writerow(["" if row[c] is None else (_g(row[c]) if isinstance(row[c], float) else row[c])
                            for c in SWEEP_COLUMNS])


def sweep(config, axis, values, parallelism=1, out_dir=None):
    """Run ``config`` once per value of the numeric field at dotted path ``axis``.

    Rows come back in the order of ``values`` whatever the parallelism. With
    ``out_dir`` every run writes its artifacts to ``out_dir/run_<k>``.
    """
    path = resolve(config)
    doc = read_document(path)
    set_path(doc, axis, 0.0)  # validates the path before any work starts
    jobs = []
    for k, value in enumerate(values):
        run_dir = None if out_dir is None else Path(out_dir) / f"run_{k:03d}"
        jobs.append((doc, str(path), axis, float(value), run_dir))
    if parallelism <= 1 or len(jobs) <= 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=int(parallelism)) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    return SweepTable(axis, rows)


__all__ = [
    "ConvergenceReport", "SweepTable", "convergence_study", "load_final_state", "run_scenario",
    "summarize", "sweep", "time_to_threshold", "write_artifacts", "write_final_state",
]
