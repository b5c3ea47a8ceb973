"""Compare the shortest-path solver for the fast defending robber with the full game on small graphs."""

import argparse
import time
from fractions import Fraction

import numpy as np

from gpcr.games import SurvivalProfile, build_fast_defending, solve_fast_defending_optimized
from gpcr.graph import iter_connected_graphs
from gpcr.solver import value_iterate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-vertices", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    t_fast = t_naive = 0.0
    count = 0
    for g in iter_connected_graphs(args.max_vertices):
        table = {e: [Fraction(1, 4), Fraction(1, 2), Fraction(1)][int(rng.integers(3))] for e in g.reflexive_edges()}
        for mode in ("free", "loop"):
            q = SurvivalProfile(table)
            t0 = time.perf_counter()
            fast = solve_fast_defending_optimized(g, q, args.horizon, mode)
            t1 = time.perf_counter()
            spec = build_fast_defending(g, q, stay_mode=mode)
            w = value_iterate(spec, args.horizon, keep_all=True).values
            t2 = time.perf_counter()
            t_fast += t1 - t0
            t_naive += t2 - t1
            for c in g.vertices:
                for r in g.vertices:
                    worst = max(worst, float(np.max(np.abs(fast.values[:, c, r] - w[:, spec.state_id(c, r)]))))
            count += 1
    print(f"{count} configurations, max |optimized - naive| = {worst:.3g}")
    print(f"time: optimized {t_fast:.2f}s, naive {t_naive:.2f}s")


if __name__ == "__main__":
    main()
