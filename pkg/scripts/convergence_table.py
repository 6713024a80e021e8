"""Observed spatial orders for the manufactured-solution scenarios.

    python scripts/convergence_table.py [--grids 51,101,201] [--reference 801]

Prints one table per model variant (L2 errors of u and v at t_end against
the reference grid, and log2 ratios between successive grids).
"""
import argparse

from chemolab.harness import convergence_study, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", default="51,101,201")
    ap.add_argument("--reference", type=int, default=801)
    ap.add_argument("--scenarios", default="manufactured,manufactured-ph")
    args = ap.parse_args()
    grids = [int(g) for g in args.grids.split(",")]
    for name in args.scenarios.split(","):
        rep = convergence_study(load_scenario(name), grids, args.reference)
        print(f"{name} (reference n={rep.reference_n})")
        print(f"{'n':>6} {'err u':>12} {'order':>7} {'err v':>12} {'order':>7}")
        for row in rep.rows():
            ou = "" if row["order_u"] is None else f"{row['order_u']:.3f}"
            ov = "" if row["order_v"] is None else f"{row['order_v']:.3f}"
            print(f"{row['n']:>6} {row['error_u']:12.4e} {ou:>7} {row['error_v']:12.4e} {ov:>7}")
        print()


if __name__ == "__main__":
    main()
