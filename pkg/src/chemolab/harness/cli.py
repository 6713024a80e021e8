"""Command line entry point: ``chemolab <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 run failure, 3 lemma violation.
Run artifacts go below ``$CHEMOLAB_OUTPUT_ROOT`` (default ``./runs``).
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from ..errors import ChemolabError, ConfigError, RunFailed
from ..lemmas import LEMMAS, fuzz_lemma
from ..model import Field, SpatialGrid, cole_hopf_forward, cole_hopf_inverse
from .config import load_scenario, output_dir_for, output_root
from .runs import convergence_study, run_scenario, sweep

EXIT_OK, EXIT_VALIDATION, EXIT_RUN, EXIT_LEMMA = 0, 1, 2, 3


def _floats(text):
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _ints(text):
    vals = _floats(text)
    if any(not v.is_integer() for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")
    return [int(v) for v in vals]


def cmd_simulate(args):
    sc = load_scenario(args.config)
    if args.n is not None:
        sc = sc.with_grid(args.n)
    out = Path(args.out) if args.out else output_dir_for(sc)
    result, out = run_scenario(sc, out_dir=out)
    recs = result.records
    print(f"{sc.name}: {result.status.value} after {result.metadata.get('steps', 0)} steps "
          f"({result.metadata.get('wall_time', 0.0):.2f} s)")
    if recs:
        print(f"  H1 deviation {recs[0].h1_total:.6e} -> {recs[-1].h1_total:.6e}")
    if result.message:
        print(f"  {result.message}")
    print(f"  artifacts: {out}")
    if result.status.value == "Rejected":
        return EXIT_VALIDATION
    return EXIT_OK if result.ok else EXIT_RUN


def cmd_sweep(args):
    sc = load_scenario(args.config)
    out = Path(args.out) if args.out else output_root() / f"{sc.name}-sweep"
    table = sweep(args.config, args.axis, args.values, parallelism=args.parallel, out_dir=out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "sweep.csv")
    print(f"{'value':>10} {'status':>15} {'final_h1':>12} {'C*':>12} {'t_thr':>8}  BA")
    for r in table.rows:
        fmt = lambda x, spec: "-" if x is None else format(x, spec)  # noqa: E731
        print(f"{r['value']:>10g} {r['status']:>15} {fmt(r['final_h1'], '12.4e')} "
              f"{fmt(r['c_star'], '12.4e')} {fmt(r['time_to_threshold'], '8.3f')}  {r['ba_verdict']}")
    print(f"  table: {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_convergence(args):
    sc = load_scenario(args.config)
    rep = convergence_study(sc, args.grids, args.reference)
    print(f"{'n':>6} {'L2 err u':>12} {'order':>7} {'L2 err v':>12} {'order':>7}")
    for row in rep.rows():
        ou = "" if row["order_u"] is None else f"{row['order_u']:.3f}"
        ov = "" if row["order_v"] is None else f"{row['order_v']:.3f}"
        print(f"{row['n']:>6} {row['error_u']:12.4e} {ou:>7} {row['error_v']:12.4e} {ov:>7}")
    if rep.note:
        print(f"  {rep.note}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["n", "error_u", "order_u", "error_v", "order_v"],
                               lineterminator="\n")
            w.writeheader()
            for row in rep.rows():
                w.writerow({k: ("" if v is None else (format(v, ".17g") if isinstance(v, float) else v))
                            for k, v in row.items()})
    return EXIT_OK


def cmd_verify_lemmas(args):
    ok = True
    started = time.perf_counter()
    for i, name in enumerate(LEMMAS):
        rep = fuzz_lemma(name, args.samples, args.seed + i, rho_max=args.rho_max)
        ok &= rep.passed
        wit = ", ".join(f"{k}: {v:.1e}" for k, v in rep.witnesses.items())
        print(f"{name}: {'PASS' if rep.passed else 'FAIL'} min residual {rep.min_residual:.3e} "
              f"at rho={rep.argmin[0]:.4g}, s={rep.argmin[1]:.4g}; violations {rep.violations}; "
              f"witnesses [{wit}]")
    print(f"  {time.perf_counter() - started:.2f} s")
    return EXIT_OK if ok else EXIT_LEMMA


def _read_xy(path):
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if xs:
                    raise ConfigError(f"bad row {row!r}", path=path)
                continue
            xs.append(x)
            ys.append(y)
    x = np.array(xs)
    if x.size < 3:
        raise ConfigError("need at least three (x, value) rows", path=path)
    grid = SpatialGrid(float(x[0]), float(x[-1]), x.size)
    if not np.allclose(x, grid.x, rtol=0, atol=1e-9 * max(1.0, grid.length)):
        raise ConfigError("x column must be uniformly spaced", path=path)
    return grid, np.array(ys)


def cmd_transform(args):
    grid, y = _read_xy(args.csv)
    f = Field(grid, y)
    if args.direction == "forward":
        out = cole_hopf_forward(f, args.sigma, args.t)
    else:
        out = cole_hopf_inverse(f, args.anchor)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "v" if args.direction == "forward" else "c"])
        for x, val in zip(grid.x, out.values):
            w.writerow([format(float(x), ".17g"), format(float(val), ".17g")])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="chemolab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario and write its artifacts")
    s.add_argument("config", help="scenario file or bundled scenario name")
    s.add_argument("--out", help="output directory (default: output root / scenario name)")
    s.add_argument("--n", type=int, help="override the number of grid nodes")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="vary one numeric config field")
    s.add_argument("config")
    s.add_argument("--axis", required=True, help="dotted path, e.g. model.gamma")
    s.add_argument("--values", required=True, type=_floats, help="comma-separated values")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("convergence", help="self-convergence study")
    s.add_argument("config")
    s.add_argument("--grids", required=True, type=_ints, help="e.g. 51,101,201")
    s.add_argument("--reference", required=True, type=int)
    s.add_argument("--out", help="optional CSV for the error table")
    s.set_defaults(func=cmd_convergence)

    s = sub.add_parser("verify-lemmas", help="fuzz the elementary inequalities")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rho-max", type=float, default=1e3)
    s.set_defaults(func=cmd_verify_lemmas)

    s = sub.add_parser("transform", help="Cole-Hopf transform of a tabulated profile")
    s.add_argument("csv", help="two columns: x, value (uniform x)")
    s.add_argument("--direction", choices=["forward", "inverse"], required=True)
    s.add_argument("--anchor", type=float, default=1.0, help="c(a) for the inverse direction")
    s.add_argument("--sigma", type=float, default=0.0)
    s.add_argument("--t", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_transform)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RunFailed as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN
    except (ChemolabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
