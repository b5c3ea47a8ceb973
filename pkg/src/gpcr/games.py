"""Builders turning concrete pursuit games on a graph into explicit :class:`GameSpec` objects.

Every graph game uses two-phase placement: from ``(i_cop, i_rob)`` the cops
jump to any vertex, then the robber does (seeing where the cops stand). After
that, moves follow the closed neighbourhoods of the graph.

Several builders accept ``cops=k``: the cop component then becomes a
``k``-tuple of vertices and one cop action moves the whole team at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Literal, Mapping, Sequence

import numpy as np

from .game import Distribution, GameError, GameSpec, Prob, SpecBuilder, as_fraction, check_valid
from .graph import Edge, Graph, GraphError, WeightedDigraphView, _norm, elementary_paths_from, max_product_survival

I_COP = "i_cop"
I_ROB = "i_rob"
JAIL = "j*"
DEFAULT_STATE_BUDGET = 200_000

Variant = Literal["classic", "drunk", "drunk-defending", "random-robber", "fast-defending"]


# ----------------------------------------------------------------------------
# Parameter profiles


@dataclass(frozen=True)
class CaptureProfile:
    """Per-vertex probability ``p(v)`` that a robber sharing the cop's vertex is jailed."""

    values: tuple[Fraction, ...]

    @classmethod
    def of(cls, g: Graph, p: Prob | Sequence[Prob] | Mapping[int, Prob]) -> "CaptureProfile":
        if isinstance(p, Mapping):
            vals = [p[v] for v in g.vertices]
        elif isinstance(p, (list, tuple, np.ndarray)):
            if len(p) != g.vertex_count:
                raise GameError("capture profile must give one probability per vertex")
            vals = list(p)
        else:
            vals = [p] * g.vertex_count
        out = tuple(as_fraction(x) for x in vals)
        for v, x in enumerate(out):
            if not 0 <= x <= 1:
                raise GameError(f"capture probability {float(x)} at vertex {v} outside [0, 1]")
        return cls(out)

    def __call__(self, v: int) -> Fraction:
        return self.values[v]


ZoneMode = Literal["incident", "radius2"]


@dataclass(frozen=True)
class SurvivalProfile:
    """Survival probability of crossing edge ``e`` while the cop stands on ``c``.

    ``q`` is a constant, an ``{edge: q}`` table, or a callable ``(c, e) -> q``;
    it only applies to edges in the cop's watch zone, every other edge is
    crossed safely. The default zone is E_c, the edges incident to ``c``
    (including the loop ``(c, c)``). ``radius2`` watches every edge with an
    endpoint in N[c].
    """

    q: Prob | Mapping[Edge, Prob] | Callable[[int, Edge], Prob] = Fraction(1, 2)
    zone: ZoneMode = "incident"

    def watch_zone(self, g: Graph, c: int) -> frozenset[Edge]:
        if self.zone == "incident":
            return g.incident_edges(c)
        if self.zone == "radius2":
            near = set(g.closed_neighborhood(c))
            return frozenset(e for e in g.reflexive_edges() if e[0] in near or e[1] in near)
        raise GameError(f"unknown watch zone mode {self.zone!r}")

    def raw(self, c: int, e: Edge) -> Fraction:
        if callable(self.q):
            x = self.q(c, e)
        elif isinstance(self.q, Mapping):
            x = self.q.get(e, 1)
        else:
            x = self.q
        x = as_fraction(x)
        if not 0 <= x <= 1:
            raise GameError(f"survival probability {float(x)} on edge {e} outside [0, 1]")
        return x

    def __call__(self, g: Graph, c: int, e: Edge) -> Fraction:
        e = _norm(*e)
        return self.raw(c, e) if e in self.watch_zone(g, c) else Fraction(1)


def check_robber_kernel(g: Graph, phi: Mapping[int, Mapping[int, Prob]]) -> dict[int, Distribution]:
    """Validate a per-vertex robber distribution (support inside N[r], total 1)."""
    out = {}
    for r in g.vertices:
        if r not in phi:
            raise GameError(f"robber kernel missing for vertex {r}")
        d = Distribution.of(phi[r])
        allowed = set(g.closed_neighborhood(r))
        stray = [x for x in d.support if x not in allowed]
        if stray:
            raise GameError(f"robber kernel at {r} puts mass on {stray}, outside N[{r}]")
        if abs(d.total() - 1) > 1e-9 or any(p < 0 for p in d.exact):
            raise GameError(f"robber kernel at {r} is not a probability distribution")
        out[r] = d
    return out


def uniform_kernel(g: Graph) -> dict[int, dict[int, Fraction]]:
    return {r: {x: Fraction(1, len(g.closed_neighborhood(r))) for x in g.closed_neighborhood(r)} for r in g.vertices}


def directional_cycle_kernel(n: int, forward: Prob = Fraction(9, 10)) -> dict[int, dict[int, Fraction]]:
    """Robber on the cycle ``C_n`` stepping to ``r+1`` w.p. ``forward`` and ``r-1`` otherwise."""
    if n < 3:
        raise GraphError("a directional walk needs a cycle of length at least 3")
    f = as_fraction(forward)
    return {r: {(r + 1) % n: f, (r - 1) % n: 1 - f} for r in range(n)}


# ----------------------------------------------------------------------------
# Shared placement skeleton


def _cop_label(pos: Hashable) -> str:
    return str(pos) if not isinstance(pos, tuple) else "(" + ",".join(map(str, pos)) + ")"


def _state_label(c: Hashable, r: Hashable) -> str:
    return f"({_cop_label(c)},{r})"


def _team_count(g: Graph, cops: int) -> int:
    if cops < 1:
        raise GameError("at least one cop is required")
    return (g.vertex_count**cops + 1) * (g.vertex_count + 1)


def _team_actions(g: Graph, cops: int) -> tuple[list[Hashable], dict[Hashable, int]]:
    if cops == 1:
        moves: list[Hashable] = list(g.vertices)
    else:
        moves = list(itertools.product(g.vertices, repeat=cops))
    return moves, {m: i for i, m in enumerate(moves)}


def _team_moves(g: Graph, c: Hashable, cops: int) -> list[Hashable]:
    if c == I_COP:
        return list(g.vertices) if cops == 1 else list(itertools.product(g.vertices, repeat=cops))
    if cops == 1:
        return list(g.closed_neighborhood(c))
    return list(itertools.product(*(g.closed_neighborhood(x) for x in c)))


def _occupies(c: Hashable, r: Hashable) -> bool:
    if c == I_COP or r == I_ROB or r == JAIL:
        return False
    return r in c if isinstance(c, tuple) else c == r


RobberStep = Callable[[Hashable, int], list[tuple[int, list[tuple[tuple[Hashable, Hashable], Prob]]]]]


def _placement_game(
    g: Graph,
    name: str,
    cops: int,
    rob_labels: Sequence[str],
    robber_step: RobberStep,
    capture_on_meet: bool,
    jail: bool,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> GameSpec:
    """Skeleton shared by the single-step graph games.

    ``robber_step(c, r)`` lists, for a placed robber on vertex ``r``, the
    robber's playable actions with their outcome distributions over
    (cop, robber) components. Placement moves are generated here.
    """
    count = _team_count(g, cops) + (1 if jail else 0)
    if count > state_budget:
        raise GameError(f"state budget exceeded: {count} states > {state_budget}")
    team, team_id = _team_actions(g, cops)
    b = SpecBuilder([_cop_label(m) for m in team], rob_labels, name)
    cop_positions: list[Hashable] = [I_COP] + team
    rob_positions: list[Hashable] = [I_ROB] + list(g.vertices)
    for c in cop_positions:
        for r in rob_positions:
            b.state(c, r, display=_state_label(c, r))
    if jail:
        j = b.state(JAIL, JAIL, display=f"({JAIL},{JAIL})")
        b.final(j)
        b.cop(j, 0, Distribution.dirac(j))
        b.rob(j, 0, Distribution.dirac(j))
    sid = lambda c, r: b._index[(c, r, None)]  # noqa: E731
    for c in cop_positions:
        for r in rob_positions:
            s = sid(c, r)
            final = capture_on_meet and _occupies(c, r)
            if final:
                b.final(s)
            for m in _team_moves(g, c, cops):
                b.cop(s, team_id[m], Distribution.dirac(s if final else sid(m, r)))
            if r == I_ROB:
                for v in g.vertices:
                    b.rob(s, v, Distribution.dirac(s if final else sid(c, v)))
                continue
            for a, outcome in robber_step(c, r):
                if final:
                    b.rob(s, a, Distribution.dirac(s))
                else:
                    b.rob(s, a, Distribution.of((sid(*key) if key != (JAIL, JAIL) else j, p) for key, p in outcome))
    return check_valid(b.build(sid(I_COP, I_ROB)))


def _vertex_labels(g: Graph) -> list[str]:
    return [g.label(v) for v in g.vertices]


# ----------------------------------------------------------------------------
# Concrete games


def build_classic(g: Graph, cops: int = 1, state_budget: int = DEFAULT_STATE_BUDGET) -> GameSpec:
    """Deterministic game: capture when a cop and the robber share a vertex."""

    def step(c, r):
        return [(x, [((c, x), 1)]) for x in g.closed_neighborhood(r)]

    return _placement_game(g, "classic", cops, _vertex_labels(g), step, capture_on_meet=True, jail=False, state_budget=state_budget)


def build_drunk(g: Graph, cops: int = 1, state_budget: int = DEFAULT_STATE_BUDGET) -> GameSpec:
    """After placement the robber drifts uniformly over N[r]; her only action is ``drift``."""
    drift = g.vertex_count

    def step(c, r):
        nb = g.closed_neighborhood(r)
        return [(drift, [((c, x), Fraction(1, len(nb))) for x in nb])]

    return _placement_game(g, "drunk", cops, _vertex_labels(g) + ["drift"], step, True, False, state_budget)


def build_random_robber(
    g: Graph, phi: Mapping[int, Mapping[int, Prob]], cops: int = 1, state_budget: int = DEFAULT_STATE_BUDGET
) -> GameSpec:
    """Drunk-game shape with the robber's step drawn from ``phi[r]`` instead of uniformly."""
    kernel = check_robber_kernel(g, phi)
    drift = g.vertex_count

    def step(c, r):
        return [(drift, [((c, x), p) for x, p in kernel[r].exact_items()])]

    return _placement_game(g, "random-robber", cops, _vertex_labels(g) + ["drift"], step, True, False, state_budget)


def build_drunk_defending(
    g: Graph, p: Prob | Sequence[Prob] | Mapping[int, Prob], cops: int = 1, state_budget: int = DEFAULT_STATE_BUDGET
) -> GameSpec:
    """Drunk robber who may escape: meeting the cop jails her only with probability ``p(r)``.

    The jail ``(j*, j*)`` is the only final state. When a cop stands on the
    robber's vertex the robber's next move is jail w.p. ``p(r)``, otherwise a
    uniform step in N[r].
    """
    prof = CaptureProfile.of(g, p)
    drift = g.vertex_count

    def step(c, r):
        nb = g.closed_neighborhood(r)
        if _occupies(c, r):
            pr = prof(r)
            out = [((c, x), (1 - pr) / len(nb)) for x in nb]
            return [(drift, out + [((JAIL, JAIL), pr)])]
        return [(drift, [((c, x), Fraction(1, len(nb))) for x in nb])]

    return _placement_game(g, "drunk-defending", cops, _vertex_labels(g) + ["drift"], step, False, True, state_budget)


# ----------------------------------------------------------------------------
# Fast defending robber


StayMode = Literal["free", "loop"]


def _path_label(path: tuple[int, ...]) -> str:
    return "path " + "-".join(map(str, path))


def path_survival(g: Graph, q: SurvivalProfile, c: int, path: tuple[int, ...], stay_mode: StayMode = "free") -> Fraction:
    """Probability of walking ``path`` unharmed while the cop watches from ``c``."""
    if len(path) == 1:
        return q(g, c, (path[0], path[0])) if stay_mode == "loop" else Fraction(1)
    out = Fraction(1)
    for a, b in zip(path, path[1:]):
        out *= q(g, c, (a, b))
    return out


def build_fast_defending(
    g: Graph,
    q: SurvivalProfile | Prob = Fraction(1, 2),
    path_cap: int | None = None,
    stay_mode: StayMode = "free",
) -> GameSpec:
    """Robber moves along any elementary path and is jailed on a watched edge w.p. ``1 - q``.

    Robber actions are the placements (one per vertex) followed by every
    elementary path of at most ``path_cap`` edges. With ``stay_mode="free"``
    the empty path crosses nothing and always survives; with ``"loop"`` it
    crosses the loop ``(r, r)``, which the cop watches when standing on ``r``.
    """
    if not isinstance(q, SurvivalProfile):
        q = SurvivalProfile(q)
    if path_cap is None:
        path_cap = max(g.vertex_count - 1, 1)
    if path_cap < 1:
        raise GameError("path_cap must be at least 1")
    V = list(g.vertices)
    paths: list[tuple[int, ...]] = []
    by_start: dict[int, list[int]] = {}
    for r in V:
        for pth in elementary_paths_from(g, r, path_cap):
            by_start.setdefault(r, []).append(len(V) + len(paths))
            paths.append(pth)
    b = SpecBuilder(_vertex_labels(g), _vertex_labels(g) + [_path_label(p) for p in paths], "fast-defending")

    def disp(c, r):
        zone = "∅" if c == I_COP else f"E_{c}"
        return f"({c},{zone},{r})"

    for c in [I_COP] + V:
        for r in [I_ROB] + V:
            b.state(c, r, display=disp(c, r))
    j = b.state(JAIL, JAIL, display=f"({JAIL},∅,{JAIL})")
    b.final(j)
    b.cop(j, 0, Distribution.dirac(j))
    b.rob(j, 0, Distribution.dirac(j))
    sid = lambda c, r: b._index[(c, r, None)]  # noqa: E731
    for c in [I_COP] + V:
        for r in [I_ROB] + V:
            s = sid(c, r)
            for x in V if c == I_COP else g.closed_neighborhood(c):
                b.cop(s, x, Distribution.dirac(sid(x, r)))
            if r == I_ROB:
                for v in V:
                    b.rob(s, v, Distribution.dirac(sid(c, v)))
                continue
            for a in by_start[r]:
                pth = paths[a - len(V)]
                surv = Fraction(1) if c == I_COP else path_survival(g, q, c, pth, stay_mode)
                b.rob(s, a, Distribution.of([(sid(c, pth[-1]), surv), (j, 1 - surv)]))
    return check_valid(b.build(sid(I_COP, I_ROB)))


@dataclass
class FastDefendingValues:
    """Output of the shortest-path solver.

    ``values[k, c, r]`` is ``w_k`` at the cop-to-move state with the cop on
    ``c`` and the robber on ``r``; ``initial[k]`` is ``w_k(i_0)``;
    ``survival[c', r, r']`` the best survival probability from ``r`` to
    ``r'`` under the watch zone of ``c'``.
    """

    values: np.ndarray
    initial: np.ndarray
    survival: np.ndarray

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


def survival_matrix(g: Graph, q: SurvivalProfile, stay_mode: StayMode = "free") -> np.ndarray:
    """``Q[c', r, r']``: max-product survival over paths from ``r`` to ``r'`` (Dijkstra on -ln q)."""
    n = g.vertex_count
    Q = np.zeros((n, n, n))
    for cp in g.vertices:
        view = WeightedDigraphView.from_survival(g, lambda e, cp=cp: float(q(g, cp, e)))
        for r in g.vertices:
            Q[cp, r] = max_product_survival(g, view, r)
            Q[cp, r, r] = float(q(g, cp, (r, r))) if stay_mode == "loop" else 1.0
    return Q


def solve_fast_defending_optimized(
    g: Graph, q: SurvivalProfile | Prob = Fraction(1, 2), n: int = 1, stay_mode: StayMode = "free"
) -> FastDefendingValues:
    """Capture probabilities of the fast defending robber game without enumerating paths.

    ``w_k(c, r) = max_{c' in N[c]} min_{r'} ((w_{k-1}(c', r') - 1) Q_{c'}(r, r') + 1)``,
    with one shortest-path computation per (cop vertex, robber source).
    """
    if not isinstance(q, SurvivalProfile):
        q = SurvivalProfile(q)
    V = g.vertex_count
    Q = survival_matrix(g, q, stay_mode)
    nbr = [list(g.closed_neighborhood(c)) for c in g.vertices]
    w = np.zeros((n + 1, V, V))
    init = np.zeros(n + 1)
    for k in range(1, n + 1):
        prev = w[k - 1]
        # after[c', r]: robber at r facing a cop who just moved to c'
        after = np.min((prev[:, None, :] - 1.0) * Q + 1.0, axis=2)
        for c in g.vertices:
            w[k, c] = after[nbr[c]].max(axis=0)
        init[k] = prev.min(axis=1).max()
    return FastDefendingValues(w, init, Q)


# ----------------------------------------------------------------------------
# Markov chains and temporal graphs


def build_markov_chain(initial_dist: Sequence[Prob] | Mapping[int, Prob], matrices: Sequence[Sequence[Sequence[Prob]]]) -> GameSpec:
    """An inhomogeneous Markov chain encoded as a game with no final state.

    States are ``i0`` and ``(e, j)`` for chain state ``e`` and step ``j``; the
    step ``j`` transition uses ``matrices[j]`` and the last matrix repeats on
    the last layer. Both teams have a single action; the robber never moves.
    """
    if not matrices:
        raise GameError("at least one transition matrix is required")
    mats = [[[as_fraction(x) for x in row] for row in m] for m in matrices]
    m = len(mats[0])
    for idx, mat in enumerate(mats):
        if len(mat) != m or any(len(row) != m for row in mat):
            raise GameError(f"matrix {idx} is not {m}x{m}")
        for i, row in enumerate(mat):
            if any(x < 0 for x in row) or abs(sum(row) - 1) > 1e-9:
                raise GameError(f"matrix {idx} row {i} is not stochastic")
    init = Distribution.of(initial_dist if isinstance(initial_dist, Mapping) else enumerate(initial_dist))
    if any(not 0 <= e < m for e in init.support) or abs(init.total() - 1) > 1e-9:
        raise GameError("initial distribution must be a distribution over the chain states")
    L = len(mats)
    b = SpecBuilder(["step"], ["wait"], "markov-chain")
    i0 = b.state("i0", "-", None, display="i0")
    for j in range(L + 1):
        for e in range(m):
            b.state(e, "-", j, display=f"({e},{j})")
    sid = lambda e, j: b._index[(e, "-", j)]  # noqa: E731
    b.cop(i0, 0, Distribution.of((sid(e, 0), p) for e, p in init.exact_items()))
    b.rob(i0, 0, Distribution.dirac(i0))
    for j in range(L + 1):
        mat = mats[min(j, L - 1)]
        nxt = min(j + 1, L)
        for e in range(m):
            s = sid(e, j)
            b.cop(s, 0, Distribution.of((sid(x, nxt), p) for x, p in enumerate(mat[e])))
            b.rob(s, 0, Distribution.dirac(s))
    return check_valid(b.build(i0))


def build_temporal(seq: Sequence[Graph], variant: Literal["classic", "drunk"] = "classic") -> GameSpec:
    """Game on a graph sequence ``G_0..G_T``; the state carries the time ``t``.

    Every move (cop or robber) advances time by one and a move made at time
    ``t`` follows the neighbourhoods of ``G_t``. Past ``T`` the last graph
    repeats, so the time component saturates at ``T`` and the game stays
    finite.
    """
    if not seq:
        raise GameError("a temporal sequence needs at least one graph")
    n = seq[0].vertex_count
    if any(h.vertex_count != n for h in seq):
        raise GameError("all graphs of a temporal sequence must share the vertex set")
    if variant not in ("classic", "drunk"):
        raise GameError(f"temporal games support classic and drunk, not {variant!r}")
    T = len(seq) - 1
    V = list(range(n))
    drunk = variant == "drunk"
    b = SpecBuilder([str(v) for v in V], [str(v) for v in V] + (["drift"] if drunk else []), f"temporal-{variant}")
    for t in range(T + 1):
        for c in [I_COP] + V:
            for r in [I_ROB] + V:
                b.state(c, r, t, display=f"({c},{r},t={t})")
    sid = lambda c, r, t: b._index[(c, r, t)]  # noqa: E731
    for t in range(T + 1):
        g = seq[t]
        nt = min(t + 1, T)
        for c in [I_COP] + V:
            for r in [I_ROB] + V:
                s = sid(c, r, t)
                final = _occupies(c, r)
                if final:
                    b.final(s)
                for x in V if c == I_COP else g.closed_neighborhood(c):
                    b.cop(s, x, Distribution.dirac(s if final else sid(x, r, nt)))
                if r == I_ROB:
                    for v in V:
                        b.rob(s, v, Distribution.dirac(s if final else sid(c, v, nt)))
                elif drunk:
                    nb = g.closed_neighborhood(r)
                    d = Distribution.dirac(s) if final else Distribution.of((sid(c, x, nt), Fraction(1, len(nb))) for x in nb)
                    b.rob(s, n, d)
                else:
                    for x in g.closed_neighborhood(r):
                        b.rob(s, x, Distribution.dirac(s if final else sid(c, x, nt)))
    return check_valid(b.build(sid(I_COP, I_ROB, 0)))


# ----------------------------------------------------------------------------
# Convenience


def post_placement_state(spec: GameSpec, c: Hashable, r: Hashable, t: int | None = None) -> int:
    return spec.state_id(c, r, t)


def build_variant(
    variant: str,
    g: Graph,
    cops: int = 1,
    capture: Prob | Sequence[Prob] | None = None,
    survival: SurvivalProfile | Prob | None = None,
    phi: Mapping[int, Mapping[int, Prob]] | None = None,
    stay_mode: StayMode = "free",
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> GameSpec:
    """Dispatch on a variant name as used by the command line."""
    if variant == "classic":
        return build_classic(g, cops, state_budget)
    if variant == "drunk":
        return build_drunk(g, cops, state_budget)
    if variant == "drunk-defending":
        return build_drunk_defending(g, Fraction(1) if capture is None else capture, cops, state_budget)
    if variant == "random-robber":
        return build_random_robber(g, uniform_kernel(g) if phi is None else phi, cops, state_budget)
    if variant == "fast-defending":
        if cops != 1:
            raise GameError("fast-defending supports a single cop")
        return build_fast_defending(g, Fraction(1, 2) if survival is None else survival, stay_mode=stay_mode)
    raise GameError(f"unknown variant {variant!r}")


__all__ = [
    "CaptureProfile",
    "SurvivalProfile",
    "FastDefendingValues",
    "I_COP",
    "I_ROB",
    "JAIL",
    "build_classic",
    "build_drunk",
    "build_drunk_defending",
    "build_fast_defending",
    "build_random_robber",
    "build_markov_chain",
    "build_temporal",
    "build_variant",
    "check_robber_kernel",
    "directional_cycle_kernel",
    "path_survival",
    "post_placement_state",
    "solve_fast_defending_optimized",
    "survival_matrix",
    "uniform_kernel",
]
