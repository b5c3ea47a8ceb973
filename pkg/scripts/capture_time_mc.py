"""Expected capture time of the drunk robber: linear system against Monte Carlo."""

import argparse
import math

from gpcr.analysis import expected_capture_time, simulate_capture_times
from gpcr.games import build_drunk
from gpcr.graph import cycle_graph, path_graph
from gpcr.solver import limit_value


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--plays", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()
    for name, g in (("C4", cycle_graph(4)), ("C5", cycle_graph(5)), ("P4", path_graph(4))):
        spec = build_drunk(g)
        res = limit_value(spec, max_iter=100_000)
        exact = expected_capture_time(spec, res.cop, res.rob)
        half = expected_capture_time(spec, res.cop, res.rob, "half-moves")
        t = simulate_capture_times(spec, res.cop, res.rob, args.plays, seed=args.seed)
        se = t.std(ddof=1) / math.sqrt(len(t))
        print(f"{name}: exact {exact:.6f} turns ({half:.6f} in half-moves), simulated {t.mean():.6f} +- {se:.6f}")


if __name__ == "__main__":
    main()
