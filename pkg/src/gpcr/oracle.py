"""Small-instance ground truth computed in exact rational arithmetic.

Nothing here calls the solver's recursion: ``enumerate_value`` ranges over
pure finite-horizon strategies explicitly, ``expectimax_value`` walks the
history tree without memoization and ``preceq`` is the cop-dominance
relation of deterministic pursuit games.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterator

import numpy as np

from .game import Distribution, GameError, GameSpec, SpecBuilder, check_valid, cop_successor, rob_successor


class OracleBudgetExceeded(RuntimeError):
    """The instance is too large for exhaustive evaluation."""


ENUM_PAIR_BUDGET = 200_000
EXPECTIMAX_NODE_BUDGET = 2_000_000


def _push(dist: dict[int, Fraction], d: Distribution, mass: Fraction) -> None:
    for t, p in d.exact_items():
        dist[t] = dist.get(t, Fraction(0)) + mass * p


def _cop_levels(spec: GameSpec, start: int, n: int) -> Iterator[dict[tuple[int, int], int]]:
    """Every pure cop strategy, defined on the decision points some robber play can reach.

    Decision points are (state, turns remaining). Strategies are produced
    lazily, level by level, without materializing the full list.
    """

    def rec(k: int, frontier: list[int], sigma: dict[tuple[int, int], int]) -> Iterator[dict]:
        live = [s for s in frontier if s not in spec.finals]
        if k == 0 or not live:
            yield sigma
            return
        for choice in itertools.product(*(spec.cop_actions[s] for s in live)):
            nxt = dict(sigma)
            reach: set[int] = set()
            for s, a in zip(live, choice):
                nxt[(s, k)] = a
                for t in cop_successor(spec, s, a).support:
                    if t in spec.finals:
                        continue
                    for b in spec.rob_actions[t]:
                        reach.update(rob_successor(spec, t, b).support)
            yield from rec(k - 1, sorted(reach), nxt)

    yield from rec(n, [start], {})


def enumerate_value(spec: GameSpec, n: int, start: int | None = None, budget: int = ENUM_PAIR_BUDGET) -> Fraction:
    """``max`` over pure cop strategies of ``min`` over pure robber strategies of the capture probability.

    The capture probability of a strategy pair is propagated forward exactly.
    Robber strategies are enumerated lazily against each cop strategy, only
    at decision points that pair can reach. Raises
    :class:`OracleBudgetExceeded` after ``budget`` evaluated pairs.
    """
    check_valid(spec)
    s0 = spec.initial if start is None else start
    if s0 in spec.finals:
        return Fraction(1)
    count = 0

    def robber_min(sigma: dict, k: int, dist: dict[int, Fraction], caught: Fraction) -> Fraction:
        nonlocal count
        if k == 0 or not dist:
            count += 1
            if count > budget:
                raise OracleBudgetExceeded(f"more than {budget} strategy pairs")
            return caught
        after: dict[int, Fraction] = {}
        for s, m in dist.items():
            _push(after, cop_successor(spec, s, sigma[(s, k)]), m)
        caught = caught + sum((m for t, m in after.items() if t in spec.finals), Fraction(0))
        live = sorted(t for t in after if t not in spec.finals)
        best = None
        for choice in itertools.product(*(spec.rob_actions[t] for t in live)):
            nxt: dict[int, Fraction] = {}
            for t, b in zip(live, choice):
                _push(nxt, rob_successor(spec, t, b), after[t])
            c2 = caught + sum((m for t, m in nxt.items() if t in spec.finals), Fraction(0))
            rest = {t: m for t, m in nxt.items() if t not in spec.finals}
            val = robber_min(sigma, k - 1, rest, c2)
            if best is None or val < best:
                best = val
        if best is None:
            count += 1
            return caught
        return best

    best = Fraction(0)
    for sigma in _cop_levels(spec, s0, n):
        val = robber_min(sigma, n, {s0: Fraction(1)}, Fraction(0))
        if val > best:
            best = val
    return best


def expectimax_value(spec: GameSpec, n: int, start: int | None = None, node_budget: int = EXPECTIMAX_NODE_BUDGET) -> Fraction:
    """Optimal capture probability within ``n`` turns by plain history-tree search."""
    check_valid(spec)
    if spec.state_count > 60 or n > 8:
        raise OracleBudgetExceeded("expectimax is limited to 60 states and 8 turns")
    nodes = 0

    def tick() -> None:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise OracleBudgetExceeded(f"more than {node_budget} tree nodes")

    def cop_node(s: int, k: int) -> Fraction:
        tick()
        if s in spec.finals:
            return Fraction(1)
        if k == 0:
            return Fraction(0)
        return max(
            sum((p * rob_node(t, k) for t, p in cop_successor(spec, s, a).exact_items()), Fraction(0))
            for a in spec.cop_actions[s]
        )

    def rob_node(s: int, k: int) -> Fraction:
        tick()
        if s in spec.finals:
            return Fraction(1)
        return min(
            sum((p * cop_node(t, k - 1) for t, p in rob_successor(spec, s, a).exact_items()), Fraction(0))
            for a in spec.rob_actions[s]
        )

    return cop_node(spec.initial if start is None else start, n)


# ----------------------------------------------------------------------------
# Deterministic position games and the cop-dominance relation


@dataclass(frozen=True)
class PositionGame:
    """Deterministic two-player game on cop positions ``P`` and robber positions ``E``.

    ``cop_moves[(p, q)]`` are the cop positions reachable from state
    ``(p, q)``; ``rob_moves[(p, q)]`` the robber positions.
    """

    cop_positions: tuple[Hashable, ...]
    rob_positions: tuple[Hashable, ...]
    finals: frozenset[tuple[Hashable, Hashable]]
    cop_moves: dict[tuple[Hashable, Hashable], tuple[Hashable, ...]]
    rob_moves: dict[tuple[Hashable, Hashable], tuple[Hashable, ...]]


def _is_position(x: Hashable) -> bool:
    return isinstance(x, (int, np.integer)) or (isinstance(x, tuple) and all(isinstance(v, (int, np.integer)) for v in x))


def position_game_from_spec(spec: GameSpec) -> PositionGame:
    """Extract the position game spanned by states whose cop and robber components are positions.

    Placement pseudo-states and jails are ignored. Every kernel out of a
    position state must be a Dirac that keeps the other player's component.
    """
    idx = [s for s, m in enumerate(spec.states) if _is_position(m.cop) and _is_position(m.rob) and m.other is None]
    if not idx:
        raise GameError("no state with position components: not a two-player position game")
    cops = tuple(sorted({spec.states[s].cop for s in idx}))
    robs = tuple(sorted({spec.states[s].rob for s in idx}))
    cm: dict = {}
    rm: dict = {}
    finals = set()
    for s in idx:
        m = spec.states[s]
        key = (m.cop, m.rob)
        if s in spec.finals:
            finals.add(key)
        for side, actions, succ, out, keep in (
            ("cop", spec.cop_actions[s], cop_successor, cm, "rob"),
            ("rob", spec.rob_actions[s], rob_successor, rm, "cop"),
        ):
            dests = []
            for a in actions:
                d = succ(spec, s, a)
                if not d.is_dirac():
                    raise GameError(f"non-deterministic {side} kernel at {spec.display(s)}")
                t = spec.states[d.support[0]]
                if getattr(t, keep) != getattr(m, keep) and s not in spec.finals:
                    raise GameError(f"{side} move at {spec.display(s)} changes the other player's position")
                dests.append(t.cop if side == "cop" else t.rob)
            out[key] = tuple(sorted(set(dests)))
    return PositionGame(cops, robs, frozenset(finals), cm, rm)


@dataclass
class PreceqTable:
    """``rel[i][(q, p)]`` is ``q ⪯_i p``: robber on ``q``, cop on ``p``, robber to move."""

    rel: list[dict[tuple[Hashable, Hashable], bool]]
    stabilization_index: int

    def holds(self, q: Hashable, p: Hashable, i: int) -> bool:
        if i < 0:
            return False
        return self.rel[min(i, len(self.rel) - 1)][(q, p)]

    def stable(self) -> dict[tuple[Hashable, Hashable], bool]:
        return self.rel[self.stabilization_index]


def preceq(game: PositionGame | GameSpec, i: int | None = None) -> PreceqTable:
    """Compute ``⪯_0 .. ⪯_i`` (until stabilization when ``i`` is ``None``).

    ``q ⪯_0 p`` iff ``(p, q)`` is final; ``q ⪯_i p`` iff ``(p, q)`` is final
    or every robber move ``x`` from ``(p, q)`` lands in a final state or
    admits a cop reply ``w`` with ``x ⪯_{i-1} w``.
    """
    if isinstance(game, GameSpec):
        game = position_game_from_spec(game)
    pairs = [(q, p) for p in game.cop_positions for q in game.rob_positions if (p, q) in game.rob_moves]
    cur = {(q, p): (p, q) in game.finals for q, p in pairs}
    rel = [cur]
    limit = len(pairs) + 1 if i is None else i
    stab = None
    for step in range(1, limit + 1):
        prev = rel[-1]
        nxt = {}
        for q, p in pairs:
            if (p, q) in game.finals:
                nxt[(q, p)] = True
                continue
            ok = True
            for x in game.rob_moves[(p, q)]:
                if (p, x) in game.finals:
                    continue
                if not any(prev.get((x, w), False) for w in game.cop_moves.get((p, x), ())):
                    ok = False
                    break
            nxt[(q, p)] = ok
        rel.append(nxt)
        if stab is None and nxt == prev:
            stab = step - 1
            if i is None:
                break
    if stab is None:
        stab = len(rel) - 1
    return PreceqTable(rel, stab)


@dataclass
class CorrespondenceResult:
    ok: bool
    counterexamples: list[tuple[int, Hashable, Hashable, bool, bool]]

    def __bool__(self) -> bool:
        return self.ok


def _exact_values(spec: GameSpec, n: int) -> list[dict[int, Fraction]]:
    """``w_0..w_n`` by an exact-rational backward pass, independent of the float solver."""
    ws = [{s: Fraction(int(s in spec.finals)) for s in range(spec.state_count)}]
    for _ in range(n):
        prev = ws[-1]
        rob = {
            s: min(sum((p * prev[t] for t, p in rob_successor(spec, s, a).exact_items()), Fraction(0)) for a in spec.rob_actions[s])
            for s in range(spec.state_count)
        }
        ws.append(
            {
                s: Fraction(1)
                if s in spec.finals
                else max(sum((p * rob[t] for t, p in cop_successor(spec, s, a).exact_items()), Fraction(0)) for a in spec.cop_actions[s])
                for s in range(spec.state_count)
            }
        )
    return ws


def check_correspondence(spec: GameSpec, n: int, shift: int = 1, values: list | None = None) -> CorrespondenceResult:
    """Check ``w_m(c, r) = 1`` against the dominance relation for every position state and ``m <= n``.

    The right-hand side is ``(c, r)`` final, or a cop move ``c'`` with
    ``r ⪯_{m - shift} c'``. ``shift=1`` is the alignment that holds (the
    relation is indexed with the robber to move, one half-turn behind the
    cops); ``shift=0`` is the unshifted reading, kept for comparison.
    ``values`` may supply ``w_0..w_n``; by default they are computed exactly.
    """
    game = position_game_from_spec(spec)
    table = preceq(game, max(n, 0) + 1)
    if values is None:
        values = _exact_values(spec, n)
    bad = []
    for s, meta in enumerate(spec.states):
        key = (meta.cop, meta.rob)
        if meta.other is not None or key not in game.cop_moves:
            continue
        c, r = key
        for m in range(n + 1):
            lhs = values[m][s] == 1
            rhs = key in game.finals or any(table.holds(r, cp, m - shift) for cp in game.cop_moves[key])
            if lhs != rhs:
                bad.append((m, c, r, lhs, rhs))
    return CorrespondenceResult(not bad, bad)


# ----------------------------------------------------------------------------
# Random small games


KERNEL_TEMPLATES = (
    (Fraction(1),),
    (Fraction(1, 2), Fraction(1, 2)),
    (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)),
    (Fraction(1, 4),) * 4,
    (Fraction(1, 3),) * 3,
)


def random_spec(
    rng: np.random.Generator,
    max_states: int = 8,
    max_actions: int = 2,
    final_prob: float = 0.2,
) -> GameSpec:
    """Random valid game with kernels built from the masses 1/4, 1/3, 1/2 and 1."""
    n = int(rng.integers(2, max_states + 1))
    b = SpecBuilder([f"a{i}" for i in range(max_actions)], [f"b{i}" for i in range(max_actions)], "random")
    for s in range(n):
        b.state(s, None)
    finals = {s for s in range(1, n) if rng.random() < final_prob}
    if rng.random() < 0.05:
        finals.add(0)
    for f in finals:
        b.final(f)

    def kernel() -> Distribution:
        tpl = KERNEL_TEMPLATES[int(rng.integers(len(KERNEL_TEMPLATES)))]
        while len(tpl) > n:
            tpl = KERNEL_TEMPLATES[int(rng.integers(len(KERNEL_TEMPLATES)))]
        targets = rng.choice(n, size=len(tpl), replace=False)
        return Distribution.of(zip((int(t) for t in targets), tpl))

    for s in range(n):
        for add in (b.cop, b.rob):
            k = int(rng.integers(1, max_actions + 1))
            for a in sorted(rng.choice(max_actions, size=k, replace=False)):
                add(s, int(a), Distribution.dirac(s) if s in finals else kernel())
    return check_valid(b.build(0))
