"""p-cop numbers of every small connected graph, for a chosen variant."""

import argparse
from fractions import Fraction

from gpcr.analysis import BoundaryUndecided, p_cop_number
from gpcr.graph import format_edge_list, iter_connected_graphs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variant", default="classic", choices=["classic", "drunk", "drunk-defending"])
    ap.add_argument("--max-vertices", type=int, default=5)
    ap.add_argument("--p", type=float, default=1.0)
    ap.add_argument("--horizon", type=int, default=None)
    ap.add_argument("--capture", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--k-max", type=int, default=2)
    args = ap.parse_args()
    params = {"capture": args.capture} if args.variant == "drunk-defending" else {}
    tally = {}
    for g in iter_connected_graphs(args.max_vertices):
        try:
            k = p_cop_number(args.variant, g, args.p, args.horizon, args.k_max, **params)
        except BoundaryUndecided:
            k = "undecided"
        tally[k] = tally.get(k, 0) + 1
        edges = " ".join(format_edge_list(g).split("\n")[1:]).strip()
        print(f"n={g.vertex_count} m={len(g.edges)}  {k}  [{edges}]")
    print("summary:", ", ".join(f"{k}: {c}" for k, c in sorted(tally.items(), key=str)))


if __name__ == "__main__":
    main()
