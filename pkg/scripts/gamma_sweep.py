"""Sweep the sensitivity exponent on a decay scenario and tabulate the outcome.

    python scripts/gamma_sweep.py [--scenario thm1-decay] [--values 1,2,3] [--parallel 1]

Each row shows the run status, final H1 deviation, fitted Gronwall constant
and the first time the H1 deviation falls below 1e-2 of its initial value.
"""
import argparse

from chemolab.harness import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="thm1-decay")
    ap.add_argument("--values", default="1,2,3")
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--out", help="optional CSV for the table")
    args = ap.parse_args()
    values = [float(v) for v in args.values.split(",")]
    table = sweep(args.scenario, "model.gamma", values, parallelism=args.parallel)
    print(f"{'gamma':>6} {'status':>10} {'final H1':>11} {'C*':>11} {'t(1e-2)':>8}  BA")
    for r in table.rows:
        thr = "-" if r["time_to_threshold"] is None else f"{r['time_to_threshold']:.2f}"
        h1 = "-" if r["final_h1"] is None else f"{r['final_h1']:.3e}"
        cs = "-" if r["c_star"] is None else f"{r['c_star']:.3e}"
        print(f"{r['value']:>6g} {r['status']:>10} {h1:>11} {cs:>11} {thr:>8}  {r['ba_verdict']}")
    if args.out:
        table.write_csv(args.out)


if __name__ == "__main__":
    main()
