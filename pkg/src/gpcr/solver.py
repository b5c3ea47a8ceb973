"""Finite-horizon capture probabilities, their limit, optimal strategies and game classification.

The core recursion, for non-final ``s``::

    w_0(s) = [s in F]
    w_k(s) = max_a sum_s' T_cop(s,a,s') * min_a' sum_s'' T_rob(s',a',s'') * w_{k-1}(s'')

is evaluated with one sparse mat-vec per team per horizon on the
:class:`~gpcr.game.CompiledGame` form of the game.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .game import GameError, GameSpec, check_valid, cop_successor, rob_successor

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
DEFAULT_EPSILON = 1e-12


# ----------------------------------------------------------------------------
# One Bellman sweep


@dataclass
class _Sweep:
    w: np.ndarray
    rob_values: np.ndarray
    cop_pair: np.ndarray
    rob_pair: np.ndarray


def _segment_pick(q: np.ndarray, ptr: np.ndarray, best: np.ndarray, prev_pair: np.ndarray | None, reuse: np.ndarray | None) -> np.ndarray:
    """Row index of the chosen action per state: lowest id within TIE_TOL of ``best``.

    Where ``reuse`` is set and the previous horizon's choice is still optimal,
    the previous choice is kept.
    """
    counts = np.diff(ptr)
    ok = np.abs(q - np.repeat(best, counts)) <= TIE_TOL
    idx = np.arange(q.shape[0])
    first = np.minimum.reduceat(np.where(ok, idx, q.shape[0]), ptr[:-1])
    if prev_pair is not None and reuse is not None:
        keep = reuse & ok[prev_pair]
        first = np.where(keep, prev_pair, first)
    return first


def _sweep(spec: GameSpec, w_prev: np.ndarray, prev: _Sweep | None) -> _Sweep:
    c = spec.compiled
    q_rob = c.rob_matrix @ w_prev
    v = np.minimum.reduceat(q_rob, c.rob_ptr[:-1])
    q_cop = c.cop_matrix @ v
    w = np.maximum.reduceat(q_cop, c.cop_ptr[:-1])
    w[c.final_mask] = 1.0
    if prev is None:
        rob_pair = _segment_pick(-q_rob, c.rob_ptr, -v, None, None)
        cop_pair = _segment_pick(q_cop, c.cop_ptr, w, None, None)
    else:
        rob_pair = _segment_pick(-q_rob, c.rob_ptr, -v, prev.rob_pair, np.abs(v - prev.rob_values) <= TIE_TOL)
        cop_pair = _segment_pick(q_cop, c.cop_ptr, w, prev.cop_pair, np.abs(w - w_prev) <= TIE_TOL)
    return _Sweep(w, v, cop_pair, rob_pair)


def initial_values(spec: GameSpec) -> np.ndarray:
    return spec.compiled.final_mask.astype(float)


def apply_operator(spec: GameSpec, w: np.ndarray) -> np.ndarray:
    """One application of the capture-probability operator to an arbitrary value vector."""
    return _sweep(spec, np.asarray(w, dtype=float), None).w


def robber_values(spec: GameSpec, w: np.ndarray) -> np.ndarray:
    """Per post-cop-move state, the robber's best (minimal) expected continuation value."""
    c = spec.compiled
    return np.minimum.reduceat(c.rob_matrix @ np.asarray(w, dtype=float), c.rob_ptr[:-1])


def cop_action_values(spec: GameSpec, s: int, w: np.ndarray) -> dict[int, float]:
    """Value of each playable cop action at ``s`` when ``w`` values the next turn."""
    v = robber_values(spec, w)
    return {a: float(sum(p * v[t] for t, p in cop_successor(spec, s, a).items())) for a in spec.cop_actions[s]}


def rob_action_values(spec: GameSpec, s: int, w: np.ndarray) -> dict[int, float]:
    return {a: float(sum(p * w[t] for t, p in rob_successor(spec, s, a).items())) for a in spec.rob_actions[s]}


# ----------------------------------------------------------------------------
# Finite horizon


@dataclass
class ValueTable:
    """Capture probabilities ``w_0..w_n`` and the recorded optimal actions.

    ``values`` holds every horizon only when requested with ``keep_all``;
    otherwise only ``final`` (w_n) and ``previous`` (w_{n-1}) survive.
    ``argmax_cop[k, s]`` is the cop action at ``s`` with ``k`` turns left and
    ``argmin_rob[k, s]`` the robber action at post-cop-move state ``s``;
    row 0 is -1 (no move is made with zero turns left). Both are ``None``
    when the run was made with ``keep_choices=False``.
    """

    horizon: int
    final: np.ndarray
    previous: np.ndarray | None
    argmax_cop: np.ndarray | None
    argmin_rob: np.ndarray | None
    values: np.ndarray | None = None
    rob_values: np.ndarray | None = None
    peak_stored_values: int = 0

    def w(self, k: int) -> np.ndarray:
        if k == self.horizon:
            return self.final
        if k == self.horizon - 1 and self.previous is not None:
            return self.previous
        if self.values is None:
            raise GameError(f"horizon {k} was not retained; rerun with keep_all=True")
        return self.values[k]


def value_iterate(spec: GameSpec, n: int, keep_all: bool = False, validate: bool = True, keep_choices: bool = True) -> ValueTable:
    """Compute ``w_0..w_n`` with argmax/argmin records.

    Ties are broken towards the lowest action id, except that a state whose
    value did not change since the previous horizon keeps its previous choice.
    The choice records grow with ``n``; pass ``keep_choices=False`` when only
    the values are needed and memory must stay O(|S|).
    """
    if n < 0:
        raise ValueError("horizon must be nonnegative")
    if validate:
        check_valid(spec)
    c = spec.compiled
    S = c.n
    w = initial_values(spec)
    argmax = np.full((n + 1, S), -1, dtype=np.int64) if keep_choices else None
    argmin = np.full((n + 1, S), -1, dtype=np.int64) if keep_choices else None
    values = np.empty((n + 1, S)) if keep_all else None
    rob_values = np.empty((n + 1, S)) if keep_all else None
    if keep_all:
        values[0] = w
        rob_values[0] = np.nan
    prev: _Sweep | None = None
    w_prev = None
    # w, w_prev, and the two robber-value vectors are the only live state vectors
    peak = 2 * S if n == 0 else 4 * S
    for k in range(1, n + 1):
        cur = _sweep(spec, w, prev)
        if keep_choices:
            argmax[k] = c.cop_pair_action[cur.cop_pair]
            argmin[k] = c.rob_pair_action[cur.rob_pair]
        w_prev, w = w, cur.w
        prev = cur
        if keep_all:
            values[k] = w
            rob_values[k] = cur.rob_values
    if keep_all:
        peak = (n + 1) * S * 2
    return ValueTable(n, w, w_prev, argmax, argmin, values, rob_values, peak)


@dataclass(frozen=True)
class FiniteHorizonStrategy:
    """Action per (state, turns remaining); horizons beyond the table reuse the last row."""

    choice: np.ndarray

    @property
    def horizon(self) -> int:
        return self.choice.shape[0] - 1

    def __call__(self, state: int, turns_remaining: int) -> int:
        k = min(max(turns_remaining, 1), self.horizon)
        return int(self.choice[k, state])


@dataclass(frozen=True)
class MemorylessStrategy:
    choice: np.ndarray

    def __call__(self, state: int, turns_remaining: int | None = None) -> int:
        return int(self.choice[state])

    def __len__(self) -> int:
        return len(self.choice)


def extract_finite_strategy(spec: GameSpec, table: ValueTable) -> tuple[FiniteHorizonStrategy, FiniteHorizonStrategy]:
    if table.argmax_cop is None:
        raise GameError("the table was computed with keep_choices=False")
    return FiniteHorizonStrategy(table.argmax_cop.copy()), FiniteHorizonStrategy(table.argmin_rob.copy())


# ----------------------------------------------------------------------------
# Limit values


def _refine(q: np.ndarray, cand: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Keep, per state, the candidate rows of minimal ``q``."""
    counts = np.diff(ptr)
    best = np.minimum.reduceat(np.where(cand, q, np.inf), ptr[:-1])
    return cand & (q <= np.repeat(best, counts) + TIE_TOL)


def _stop(res: float, prev_res: float | None, epsilon: float) -> bool:
    """Residual small and the geometric tail it predicts small too."""
    if res == 0.0:
        return True
    if res > epsilon or prev_res is None or prev_res == 0.0:
        return False
    rate = res / prev_res
    if rate >= 1.0:
        return False
    return res * rate / (1.0 - rate) <= epsilon


@dataclass
class LimitResult:
    values: np.ndarray
    cop: MemorylessStrategy
    rob: MemorylessStrategy
    residual: float
    iterations: int
    converged: bool


def limit_value(spec: GameSpec, epsilon: float = DEFAULT_EPSILON, max_iter: int | None = None) -> LimitResult:
    """Least fixed point of the capture operator, approached from below.

    The returned values are a lower bound of the limit. Iteration stops when
    the sup-norm change is at most ``epsilon`` and the geometric extrapolation
    of the remaining tail is too; otherwise after ``max_iter`` sweeps with
    ``converged=False``.

    The cop strategy plays, in each state, the action recorded at the first
    horizon whose value comes within ``epsilon`` of the limit. The robber
    strategy minimises against the limit values.
    """
    check_valid(spec)
    c = spec.compiled
    S = c.n
    if max_iter is None:
        max_iter = 10 * S
    w = initial_values(spec)
    prev: _Sweep | None = None
    prev_res = None
    converged = False
    k = 0
    while k < max_iter:
        cur = _sweep(spec, w, prev)
        res = float(np.max(np.abs(cur.w - w))) if S else 0.0
        w, prev = cur.w, cur
        k += 1
        if _stop(res, prev_res, epsilon):
            converged = True
            break
        prev_res = res
    if not converged:
        logger.warning("limit_value: no convergence after %d sweeps", k)
    w_est = w
    residual = float(np.max(np.abs(apply_operator(spec, w_est) - w_est)))

    # second pass: first horizon at which each state reaches its limit (cops);
    # among robber actions optimal in the limit, the one that delays capture longest
    counts = np.diff(c.rob_ptr)
    q_rob = c.rob_matrix @ w_est
    v = np.minimum.reduceat(q_rob, c.rob_ptr[:-1])
    cand = q_rob <= np.repeat(v, counts) + max(TIE_TOL, 10 * epsilon)
    cop_choice = np.full(S, -1, dtype=np.int64)
    w = initial_values(spec)
    prev = None
    for _ in range(max(k, 1)):
        cand = _refine(c.rob_matrix @ w, cand, c.rob_ptr)
        cur = _sweep(spec, w, prev)
        hit = (cop_choice < 0) & (cur.w >= w_est - epsilon)
        cop_choice[hit] = c.cop_pair_action[cur.cop_pair[hit]]
        w, prev = cur.w, cur
    missing = cop_choice < 0
    cop_choice[missing] = c.cop_pair_action[prev.cop_pair[missing]]
    rows = np.arange(len(cand))
    first = np.minimum.reduceat(np.where(cand, rows, len(cand)), c.rob_ptr[:-1])
    rob_choice = c.rob_pair_action[first]
    return LimitResult(w_est, MemorylessStrategy(cop_choice), MemorylessStrategy(rob_choice), residual, k, converged)


# ----------------------------------------------------------------------------
# Qualitative analysis: sure and almost-sure capture


def _pair_graph(spec: GameSpec):
    """Successor lists of the alternating cop/robber graph.

    Returns, for each state, the supports of its cop actions and of its
    robber actions.
    """
    cop = [[cop_successor(spec, s, a).support for a in spec.cop_actions[s]] for s in range(spec.state_count)]
    rob = [[rob_successor(spec, s, a).support for a in spec.rob_actions[s]] for s in range(spec.state_count)]
    return cop, rob


def sure_capture_turns(spec: GameSpec) -> np.ndarray:
    """Fewest turns in which the cops capture with certainty (``-1`` when impossible).

    ``w_n(s) = 1`` exactly when this number is at most ``n``.
    """
    S = spec.state_count
    cop, rob = _pair_graph(spec)
    rank = np.full(S, -1, dtype=np.int64)
    for f in spec.finals:
        rank[f] = 0
    final = rank == 0
    for k in range(1, S + 1):
        won = rank >= 0
        rob_safe = np.array(
            [final[s] or all(all(won[t] for t in sup) for sup in rob[s]) for s in range(S)], dtype=bool
        )
        changed = False
        for s in range(S):
            if rank[s] < 0 and any(all(rob_safe[t] for t in sup) for sup in cop[s]):
                rank[s] = k
                changed = True
        if not changed:
            break
    return rank


def almost_sure_states(spec: GameSpec) -> np.ndarray:
    """States from which the cops capture with probability one (exact graph algorithm).

    Classic almost-sure reachability for turn-based stochastic games: repeatedly
    discard the robber attractor of the states from which the cops cannot even
    reach a final state with positive probability.
    """
    S = spec.state_count
    cop, rob = _pair_graph(spec)
    final = np.zeros(S, dtype=bool)
    final[list(spec.finals)] = True
    # node ids: cop-to-move s -> s, robber-to-move s -> S + s
    alive = np.ones(2 * S, dtype=bool)
    alive[np.flatnonzero(final)] = False
    alive[S + np.flatnonzero(final)] = False

    def target(node_state: int) -> bool:
        return bool(final[node_state])

    def cop_ok_actions(s: int) -> list[tuple[int, ...]]:
        # cop actions whose every outcome stays in the live subgame or is final
        return [sup for sup in cop[s] if all(final[t] or alive[S + t] for t in sup)]

    while True:
        # positive attractor of F for the cops inside the live subgame
        pos = np.zeros(2 * S, dtype=bool)
        changed = True
        while changed:
            changed = False
            for s in range(S):
                if alive[s] and not pos[s]:
                    if any(any(final[t] or pos[S + t] for t in sup) for sup in cop_ok_actions(s)):
                        pos[s] = changed = True
                if alive[S + s] and not pos[S + s]:
                    if all(any(final[t] or pos[t] for t in sup) for sup in rob[s]):
                        pos[S + s] = changed = True
        losing = alive & ~pos
        if not losing.any():
            break
        # robber attractor of the losing region
        attr = losing.copy()
        changed = True
        while changed:
            changed = False
            for s in range(S):
                if alive[s] and not attr[s]:
                    if all(any((not final[t]) and (attr[S + t] or not alive[S + t]) for t in sup) for sup in cop[s]):
                        attr[s] = changed = True
                if alive[S + s] and not attr[S + s]:
                    if any(any((not final[t]) and (attr[t] or not alive[t]) for t in sup) for sup in rob[s]):
                        attr[S + s] = changed = True
        alive &= ~attr
    result = alive[:S].copy()
    result[final] = True
    return result


# ----------------------------------------------------------------------------
# Convergence analysis and classification


StateClass = Literal["null", "stationary", "stable", "increasing"]


@dataclass
class ConvergenceReport:
    """Per-state behaviour of ``w_n`` around ``n = |S|``.

    ``stable`` means ``w_|S|(s) = w_|S|+1(s)`` without a global certificate;
    such a state may still increase later. ``stationary`` is only reported
    when two consecutive horizons agree everywhere.
    """

    classification: list[StateClass]
    global_stationary: bool
    stationary_index: int | None
    w_infinity_estimate: np.ndarray
    sup_norm_residual: float
    iterations: int
    converged: bool
    w_at_size: np.ndarray = field(repr=False, default=None)
    w_after_size: np.ndarray = field(repr=False, default=None)

    def to_dict(self, spec: GameSpec | None = None) -> dict:
        names = [spec.display(s) for s in range(len(self.classification))] if spec else None
        return {
            "global_stationary": self.global_stationary,
            "stationary_index": self.stationary_index,
            "sup_norm_residual": self.sup_norm_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "states": [
                {
                    "state": names[s] if names else s,
                    "class": cls,
                    "w_infinity_estimate": float(self.w_infinity_estimate[s]),
                }
                for s, cls in enumerate(self.classification)
            ],
        }


def analyze_convergence(spec: GameSpec, epsilon: float = DEFAULT_EPSILON, max_iter: int | None = None) -> ConvergenceReport:
    check_valid(spec)
    S = spec.state_count
    if max_iter is None:
        max_iter = 10 * S
    w = initial_values(spec)
    prev = None
    history = {0: w}
    stationary_index = None
    k = 0
    while k < S + 1:
        cur = _sweep(spec, w, prev)
        k += 1
        if stationary_index is None and float(np.max(np.abs(cur.w - w))) <= epsilon:
            stationary_index = k - 1
        w, prev = cur.w, cur
        if k in (S, S + 1):
            history[k] = w
    w_s, w_s1 = history.get(S, history[0]), history[S + 1]
    global_stationary = stationary_index is not None

    classes: list[StateClass] = []
    for s in range(S):
        if w_s[s] == 0.0:
            classes.append("null")
        elif w_s1[s] > w_s[s] + epsilon:
            classes.append("increasing")
        elif global_stationary:
            classes.append("stationary")
        else:
            classes.append("stable")

    if global_stationary:
        est, residual, iterations, converged = w_s1, float(np.max(np.abs(apply_operator(spec, w_s1) - w_s1))), S + 1, True
    else:
        lim = limit_value(spec, epsilon, max_iter)
        est, residual, iterations, converged = lim.values, lim.residual, lim.iterations, lim.converged
    return ConvergenceReport(classes, global_stationary, stationary_index, est, residual, iterations, converged, w_s, w_s1)


@dataclass
class Classification:
    """Winning grades of the game from its initial state.

    ``p_copwin`` is ``None`` when the limit is within tolerance of ``p`` and
    cannot be separated from it (reported as boundary-undecided).
    """

    p: float
    copwin: bool
    copwin_turns: int | None
    almost_surely: bool
    p_copwin: bool | None
    p_copwin_turns: int | None
    w_infinity_estimate: float
    horizon: int | None = None
    n_p_copwin: bool | None = None
    w_horizon: float | None = None

    @property
    def label(self) -> str:
        if self.copwin:
            return f"copwin(n={self.copwin_turns})"
        if self.almost_surely:
            return "almost-surely-copwin"
        if self.p_copwin is None:
            return "boundary-undecided"
        if self.p_copwin:
            return f"p-copwin(p={self.p:g}, n={self.p_copwin_turns})"
        return "not-p-copwin"


def _compare(value: float, p: float, tol: float) -> bool | None:
    if value >= p + tol or value >= p == 0:
        return True
    if value <= p - tol:
        return False
    return None


def classify(
    spec: GameSpec,
    p: float = 1.0,
    n: int | None = None,
    epsilon: float = 1e-9,
    max_iter: int | None = None,
) -> Classification:
    """Grade the game: copwin, almost surely copwin, p-copwin, (n, p)-copwin.

    Certainty and almost-sure capture are decided exactly by graph analysis;
    thresholds strictly between 0 and 1 by iteration with tolerance ``epsilon``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    check_valid(spec)
    i0 = spec.initial
    turns = sure_capture_turns(spec)
    copwin = bool(turns[i0] >= 0)
    a_s = bool(almost_sure_states(spec)[i0])

    n_result = w_n = None
    if n is not None:
        w_n = float(value_iterate(spec, n, validate=False, keep_choices=False).final[i0])
        if p == 1.0:
            n_result = copwin and turns[i0] <= n
        elif p == 0.0:
            n_result = True
        else:
            n_result = _compare(w_n, p, epsilon)

    S = spec.state_count
    cap = max_iter if max_iter is not None else 10 * S
    p_turns = None
    if p == 0.0:
        p_result, p_turns = True, 0
    elif p == 1.0:
        p_result, p_turns = copwin, (int(turns[i0]) if copwin else None)
    else:
        if a_s:
            cap = max(cap, 100_000)
        w = initial_values(spec)
        prev = None
        prev_res = None
        p_result = None
        converged = False
        for k in range(1, cap + 1):
            cur = _sweep(spec, w, prev)
            res = float(np.max(np.abs(cur.w - w)))
            w, prev = cur.w, cur
            if w[i0] >= p - TIE_TOL:
                p_result, p_turns = True, k
                break
            if _stop(res, prev_res, epsilon):
                converged = True
                break
            prev_res = res
        if p_result is None and converged and not a_s:
            p_result = _compare(float(w[i0]), p, epsilon)
            if p_result:
                p_result = None  # limit above p but never crossed: leave undecided
    if a_s:
        w_inf = 1.0
    elif copwin:
        w_inf = 1.0
    else:
        w_inf = float(limit_value(spec, epsilon, max_iter).values[i0])
    return Classification(p, copwin, int(turns[i0]) if copwin else None, a_s, p_result, p_turns, w_inf, n, n_result, w_n)
