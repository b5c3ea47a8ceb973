"""Cop teams, p-cop numbers and capture times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .game import GameError, GameSpec, cop_successor, rob_successor
from .games import DEFAULT_STATE_BUDGET, build_variant
from .graph import Graph
from .solver import classify

DENSE_LIMIT = 2000

TimeConvention = Literal["turns", "half-moves"]


class BoundaryUndecided(RuntimeError):
    """The capture probability sits within tolerance of the threshold ``p``."""


def product_game(variant: str, g: Graph, k: int, state_budget: int = DEFAULT_STATE_BUDGET, **params) -> GameSpec:
    """The ``variant`` game played by a team of ``k`` cops moving simultaneously.

    The cop component is a ``k``-tuple of vertices (a plain vertex when
    ``k = 1``, so the base builder is reproduced exactly) and the robber is
    caught as soon as any cop meets the capture condition.
    """
    if k < 1:
        raise GameError("k must be at least 1")
    return build_variant(variant, g, cops=k, state_budget=state_budget, **params)


def p_cop_number(
    variant: str,
    g: Graph,
    p: float = 1.0,
    n: int | None = None,
    k_max: int = 3,
    epsilon: float = 1e-9,
    **params,
) -> int | None:
    """Smallest team size ``k <= k_max`` that is p-copwin (or (n, p)-copwin when ``n`` is given).

    Returns ``None`` when even ``k_max`` cops do not suffice.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if p == 0.0:
        return 1
    for k in range(1, k_max + 1):
        res = classify(product_game(variant, g, k, **params), p=p, n=n, epsilon=epsilon)
        ok = res.n_p_copwin if n is not None else res.p_copwin
        if ok is None:
            raise BoundaryUndecided(f"capture probability with {k} cops is within {epsilon} of p={p}")
        if ok:
            return k
    return None


# ----------------------------------------------------------------------------
# Hitting times


Policy = Callable[..., int]


@dataclass
class HittingTimeSystem:
    """Markov chain induced by a memoryless strategy pair.

    Node ``2*s`` is state ``s`` with the cops to move, ``2*s + 1`` the same
    state with the robber to move. ``cost`` is paid on leaving a node: one
    per cop move when counting turns, one half per move otherwise.
    """

    matrix: sp.csr_matrix
    target: np.ndarray
    cost: np.ndarray
    start: int

    @classmethod
    def build(cls, spec: GameSpec, cop: Policy, rob: Policy, convention: TimeConvention = "turns") -> "HittingTimeSystem":
        S = spec.state_count
        rows, cols, vals = [], [], []
        for s in range(S):
            for side, policy, succ, table in ((0, cop, cop_successor, spec.cop_actions), (1, rob, rob_successor, spec.rob_actions)):
                a = int(policy(s, 1))
                if a not in table[s]:
                    raise GameError(f"strategy plays unplayable action {a} in state {spec.display(s)}")
                nxt = 1 - side
                for t, pr in succ(spec, s, a).items():
                    rows.append(2 * s + side)
                    cols.append(2 * t + nxt)
                    vals.append(pr)
        m = sp.csr_matrix((vals, (rows, cols)), shape=(2 * S, 2 * S))
        target = np.zeros(2 * S, dtype=bool)
        for f in spec.finals:
            target[2 * f] = target[2 * f + 1] = True
        if convention == "turns":
            cost = np.tile([1.0, 0.0], S)
        elif convention == "half-moves":
            cost = np.full(2 * S, 0.5)
        else:
            raise ValueError(f"unknown time convention {convention!r}")
        return cls(m, target, cost, 2 * spec.initial)

    def sure_nodes(self) -> np.ndarray:
        """Nodes from which the chain reaches the target with probability one."""
        n = self.matrix.shape[0]
        reach = self.target.copy()
        rev = self.matrix.T.tocsr()
        stack = list(np.flatnonzero(reach))
        while stack:
            x = stack.pop()
            for y in rev.indices[rev.indptr[x] : rev.indptr[x + 1]]:
                if not reach[y]:
                    reach[y] = True
                    stack.append(y)
        # nodes that can reach a node which cannot reach the target
        bad = ~reach
        stack = list(np.flatnonzero(bad))
        while stack:
            x = stack.pop()
            for y in rev.indices[rev.indptr[x] : rev.indptr[x + 1]]:
                if not bad[y] and not self.target[y]:
                    bad[y] = True
                    stack.append(y)
        return ~bad | self.target

    def forward_reachable(self) -> np.ndarray:
        seen = np.zeros(self.matrix.shape[0], dtype=bool)
        seen[self.start] = True
        stack = [self.start]
        m = self.matrix
        while stack:
            x = stack.pop()
            if self.target[x]:
                continue
            for y in m.indices[m.indptr[x] : m.indptr[x + 1]]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        return seen

    def expected_cost(self) -> float:
        if self.target[self.start]:
            return 0.0
        if not self.sure_nodes()[self.start]:
            return math.inf
        live = self.forward_reachable() & ~self.target
        idx = np.flatnonzero(live)
        sub = self.matrix[idx][:, idx]
        a = sp.identity(len(idx), format="csr") - sub
        b = self.cost[idx]
        if len(idx) <= DENSE_LIMIT:
            h = scipy.linalg.solve(a.toarray(), b)
        else:
            h = spla.spsolve(a.tocsc(), b)
        return float(h[np.searchsorted(idx, self.start)])


def expected_capture_time(spec: GameSpec, cop: Policy, rob: Policy, convention: TimeConvention = "turns") -> float:
    """Expected capture time from ``i0`` under a memoryless strategy pair (``inf`` if capture is not sure).

    With ``convention="turns"`` the result is the expected number of turns
    started before capture; ``"half-moves"`` counts half a turn per move.
    """
    return HittingTimeSystem.build(spec, cop, rob, convention).expected_cost()


def truncated_capture_time(spec: GameSpec, cop: Policy, rob: Policy, horizon: int) -> float:
    """``E[min(T, horizon)]`` in turns, with ``T`` the capture turn under the given pair."""
    sys = HittingTimeSystem.build(spec, cop, rob, "turns")
    S = spec.state_count
    dist = np.zeros(2 * S)
    dist[sys.start] = 1.0
    mt = sys.matrix.T.tocsr()
    total = 0.0
    for _ in range(horizon):
        alive = dist * ~sys.target
        total += alive.sum()
        dist = mt @ (mt @ alive)
    return total


def simulate_capture_times(
    spec: GameSpec,
    cop: Policy,
    rob: Policy,
    plays: int,
    seed: int = 0,
    max_turns: int = 10_000,
) -> np.ndarray:
    """Capture turns of ``plays`` independent plays, simulated in lock-step.

    Uncaptured plays after ``max_turns`` are reported as ``inf``.
    """
    sys = HittingTimeSystem.build(spec, cop, rob, "turns")
    m = sys.matrix
    n = m.shape[0]
    # row r's cumulative mass lies in (r, r + 1]: one searchsorted samples every row at once
    cum = np.empty(m.nnz)
    for r in range(n):
        lo, hi = m.indptr[r], m.indptr[r + 1]
        if hi > lo:
            c = np.cumsum(m.data[lo:hi])
            cum[lo:hi] = r + c / c[-1]
    rng = np.random.default_rng(seed)
    x = np.full(plays, sys.start, dtype=np.int64)
    out = np.full(plays, math.inf)
    if sys.target[sys.start]:
        out[:] = 0.0
        return out
    active = np.arange(plays)
    for turn in range(1, max_turns + 1):
        for _ in range(2):
            pos = x[active]
            u = 1.0 - rng.random(len(active))
            k = np.searchsorted(cum, pos + u, side="left")
            k = np.minimum(k, m.indptr[pos + 1] - 1)
            x[active] = m.indices[k]
            hit = sys.target[x[active]]
            out[active[hit]] = turn
            active = active[~hit]
            if not len(active):
                return out
    return out
