"""Horizon-1 and horizon-2 values of the directional drunk robber on C5."""

import argparse
from fractions import Fraction

from gpcr.games import build_random_robber, directional_cycle_kernel
from gpcr.graph import cycle_graph
from gpcr.oracle import enumerate_value
from gpcr.solver import cop_action_values, extract_finite_strategy, value_iterate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--forward", type=Fraction, default=Fraction(9, 10), help="probability of a clockwise step")
    args = ap.parse_args()
    spec = build_random_robber(cycle_graph(5), directional_cycle_kernel(5, args.forward))
    table = value_iterate(spec, 2, keep_all=True)
    cop, _ = extract_finite_strategy(spec, table)
    print("state      w1      w2      stay    cw      ccw     sigma(.,1) sigma(.,2)")
    for c in range(5):
        s = spec.state_id(c, (c + 2) % 5)
        v = cop_action_values(spec, s, table.values[1])
        print(
            f"{spec.display(s):9s} {table.values[1][s]:.4f}  {table.values[2][s]:.4f}  "
            f"{v[c]:.4f}  {v[(c + 1) % 5]:.4f}  {v[(c - 1) % 5]:.4f}  {cop(s, 1):>10d} {cop(s, 2):>10d}"
        )
    s = spec.state_id(0, 2)
    print("exact horizon-2 value by strategy enumeration:", enumerate_value(spec, 2, start=s))


if __name__ == "__main__":
    main()
