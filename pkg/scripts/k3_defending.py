"""Capture probability on the triangle when meeting the robber jails her only with probability 1/M."""

import argparse
from fractions import Fraction

from gpcr.games import build_drunk_defending
from gpcr.graph import complete_graph
from gpcr.solver import analyze_convergence, classify, value_iterate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, nargs="+", default=[2, 4, 10])
    ap.add_argument("--horizon", type=int, default=8)
    args = ap.parse_args()
    for M in args.M:
        spec = build_drunk_defending(complete_graph(3), Fraction(1, M))
        table = value_iterate(spec, args.horizon, keep_all=True)
        s = spec.state_id(0, 1)
        print(f"M={M}: {classify(spec).label}")
        for n in range(1, args.horizon + 1):
            closed = 1 - (1 - 1 / M) ** n
            print(f"  n={n:2d}  w_n={table.values[n][s]:.12f}  closed form={closed:.12f}")
        rep = analyze_convergence(spec, max_iter=100_000)
        print(f"  limit estimate {rep.w_infinity_estimate[spec.initial]:.12f} after {rep.iterations} sweeps")


if __name__ == "__main__":
    main()
