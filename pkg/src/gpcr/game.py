"""The abstract game model: states, action tables, stochastic kernels, validation and play."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

NORMALIZATION_TOL = 1e-9

Prob = Fraction | int | float


class GameError(ValueError):
    """Raised when a game is used in a way its rules forbid."""


def as_fraction(p: Prob) -> Fraction:
    """Exact rational for a probability; floats go through their shortest repr (0.9 -> 9/10)."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, (int, np.integer)):
        return Fraction(int(p))
    return Fraction(repr(float(p)))


@dataclass(frozen=True)
class Distribution:
    """Finite distribution over state ids, kept both as floats and exact rationals."""

    support: tuple[int, ...]
    exact: tuple[Fraction, ...]

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, Prob]] | Mapping[int, Prob]) -> "Distribution":
        """Merge duplicate states, drop zero mass, renormalize once if within tolerance."""
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        acc: dict[int, Fraction] = {}
        for s, p in items:
            acc[int(s)] = acc.get(int(s), Fraction(0)) + as_fraction(p)
        acc = {s: p for s, p in acc.items() if p != 0}
        total = sum(acc.values(), Fraction(0))
        if total != 1 and total > 0 and abs(total - 1) <= NORMALIZATION_TOL:
            acc = {s: p / total for s, p in acc.items()}
        order = sorted(acc)
        return cls(tuple(order), tuple(acc[s] for s in order))

    @classmethod
    def dirac(cls, s: int) -> "Distribution":
        return cls((int(s),), (Fraction(1),))

    @classmethod
    def uniform(cls, states: Iterable[int]) -> "Distribution":
        states = sorted(set(states))
        return cls.of((s, Fraction(1, len(states))) for s in states)

    @cached_property
    def probs(self) -> tuple[float, ...]:
        return tuple(float(p) for p in self.exact)

    def items(self) -> Iterator[tuple[int, float]]:
        return zip(self.support, self.probs)

    def exact_items(self) -> Iterator[tuple[int, Fraction]]:
        return zip(self.support, self.exact)

    def prob(self, s: int) -> float:
        try:
            return self.probs[self.support.index(s)]
        except ValueError:
            return 0.0

    def total(self) -> Fraction:
        return sum(self.exact, Fraction(0))

    def is_dirac(self) -> bool:
        return len(self.support) == 1 and self.exact[0] == 1

    def __len__(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class StateMeta:
    cop: Hashable
    rob: Hashable
    other: Hashable = None
    display: str = ""

    @property
    def key(self) -> tuple[Hashable, Hashable, Hashable]:
        return (self.cop, self.rob, self.other)


TransitionTable = Mapping[tuple[int, int], Distribution]


@dataclass(frozen=True, eq=False)
class GameSpec:
    """An explicit finite game ``(S, i0, F, A, T_cop, T_rob)``.

    ``cop_actions[s]`` lists the cop actions playable at ``s`` (ids into
    ``cop_action_labels``); ``t_cop[(s, a)]`` is the resulting distribution over
    states. The robber side is symmetric. Unplayable actions are simply absent.
    """

    states: tuple[StateMeta, ...]
    initial: int
    finals: frozenset[int]
    cop_action_labels: tuple[str, ...]
    rob_action_labels: tuple[str, ...]
    cop_actions: tuple[tuple[int, ...], ...]
    rob_actions: tuple[tuple[int, ...], ...]
    t_cop: TransitionTable
    t_rob: TransitionTable
    name: str = ""

    @property
    def state_count(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict[tuple, int]:
        return {m.key: i for i, m in enumerate(self.states)}

    def state_id(self, cop: Hashable, rob: Hashable, other: Hashable = None) -> int:
        try:
            return self.index[(cop, rob, other)]
        except KeyError:
            raise GameError(f"no state with components {(cop, rob, other)!r}") from None

    def display(self, s: int) -> str:
        m = self.states[s]
        return m.display or f"({m.cop},{m.rob}{'' if m.other is None else ',' + str(m.other)})"

    def is_final(self, s: int) -> bool:
        return s in self.finals

    def is_deterministic(self) -> bool:
        return all(d.is_dirac() for d in self.t_cop.values()) and all(d.is_dirac() for d in self.t_rob.values())

    def equals(self, other: "GameSpec") -> bool:
        return to_dict(self) == to_dict(other)

    @cached_property
    def compiled(self) -> "CompiledGame":
        return CompiledGame.build(self)


def cop_successor(spec: GameSpec, s: int, a: int) -> Distribution:
    if a not in spec.cop_actions[s]:
        raise GameError(f"cop action {a} is not playable in state {s} ({spec.display(s)})")
    if s in spec.finals:
        return Distribution.dirac(s)
    return spec.t_cop[(s, a)]


def rob_successor(spec: GameSpec, s: int, a: int) -> Distribution:
    if a not in spec.rob_actions[s]:
        raise GameError(f"robber action {a} is not playable in state {s} ({spec.display(s)})")
    if s in spec.finals:
        return Distribution.dirac(s)
    return spec.t_rob[(s, a)]


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    state: int | None = None
    action: int | None = None


def validate(spec: GameSpec) -> list[Violation]:
    """Every broken game axiom, as data. An empty list means the game is valid."""
    out: list[Violation] = []
    n = spec.state_count
    if n == 0:
        return [Violation("empty", "a game needs at least one state")]
    if not 0 <= spec.initial < n:
        out.append(Violation("initial", f"initial state {spec.initial} out of range"))
    for f in spec.finals:
        if not 0 <= f < n:
            out.append(Violation("final", f"final state {f} out of range", state=f))
    if len({m.key for m in spec.states}) != n:
        out.append(Violation("meta", "state component triples are not unique"))
    if len(spec.cop_actions) != n or len(spec.rob_actions) != n:
        out.append(Violation("actions", "action lists must cover every state"))
        return out
    for side, actions, table, labels in (
        ("cop", spec.cop_actions, spec.t_cop, spec.cop_action_labels),
        ("rob", spec.rob_actions, spec.t_rob, spec.rob_action_labels),
    ):
        for s in range(n):
            acts = actions[s]
            if not acts:
                out.append(Violation(f"{side}-no-action", f"no playable {side} action in state {s}", state=s))
            if len(set(acts)) != len(acts):
                out.append(Violation(f"{side}-duplicate-action", f"duplicate {side} actions in state {s}", state=s))
            for a in acts:
                if not 0 <= a < len(labels):
                    out.append(Violation(f"{side}-action-id", f"{side} action {a} not in the action table", s, a))
                d = table.get((s, a))
                if d is None:
                    out.append(Violation(f"{side}-missing-kernel", f"no {side} kernel for ({s}, {a})", s, a))
                    continue
                out.extend(_check_distribution(d, n, side, s, a))
                if s in spec.finals and not (d.is_dirac() and d.support[0] == s):
                    out.append(
                        Violation(f"{side}-absorption", f"final state {s} must map to itself under {side} action {a}", s, a)
                    )
        for (s, a) in table:
            if not (0 <= s < n) or a not in actions[s]:
                out.append(Violation(f"{side}-orphan-kernel", f"{side} kernel for unplayable ({s}, {a})", s, a))
    return out


def _check_distribution(d: Distribution, n: int, side: str, s: int, a: int) -> list[Violation]:
    out = []
    if len(set(d.support)) != len(d.support):
        out.append(Violation(f"{side}-support", f"repeated state in kernel of ({s}, {a})", s, a))
    for t, p in zip(d.support, d.exact):
        if not 0 <= t < n:
            out.append(Violation(f"{side}-support", f"kernel of ({s}, {a}) reaches unknown state {t}", s, a))
        if p <= 0 or p > 1:
            out.append(Violation(f"{side}-probability", f"probability {p} in kernel of ({s}, {a})", s, a))
    total = d.total()
    if abs(total - 1) > NORMALIZATION_TOL:
        out.append(Violation(f"{side}-normalization", f"kernel of ({s}, {a}) sums to {float(total)}", s, a))
    return out


def check_valid(spec: GameSpec) -> GameSpec:
    problems = validate(spec)
    if problems:
        head = "; ".join(v.message for v in problems[:5])
        raise GameError(f"invalid game ({len(problems)} violations): {head}")
    return spec


class SpecBuilder:
    """Incremental construction of a :class:`GameSpec` keyed by state components."""

    def __init__(self, cop_action_labels: Sequence[str], rob_action_labels: Sequence[str], name: str = ""):
        self.cop_action_labels = tuple(cop_action_labels)
        self.rob_action_labels = tuple(rob_action_labels)
        self.name = name
        self.states: list[StateMeta] = []
        self._index: dict[tuple, int] = {}
        self.finals: set[int] = set()
        self.cop_actions: dict[int, list[int]] = {}
        self.rob_actions: dict[int, list[int]] = {}
        self.t_cop: dict[tuple[int, int], Distribution] = {}
        self.t_rob: dict[tuple[int, int], Distribution] = {}

    def state(self, cop: Hashable, rob: Hashable, other: Hashable = None, display: str = "") -> int:
        key = (cop, rob, other)
        if key not in self._index:
            self._index[key] = len(self.states)
            self.states.append(StateMeta(cop, rob, other, display))
        return self._index[key]

    def final(self, s: int) -> None:
        self.finals.add(s)

    def cop(self, s: int, a: int, dist: Distribution) -> None:
        self.cop_actions.setdefault(s, []).append(a)
        self.t_cop[(s, a)] = dist

    def rob(self, s: int, a: int, dist: Distribution) -> None:
        self.rob_actions.setdefault(s, []).append(a)
        self.t_rob[(s, a)] = dist

    def build(self, initial: int) -> GameSpec:
        n = len(self.states)
        return GameSpec(
            states=tuple(self.states),
            initial=initial,
            finals=frozenset(self.finals),
            cop_action_labels=self.cop_action_labels,
            rob_action_labels=self.rob_action_labels,
            cop_actions=tuple(tuple(sorted(self.cop_actions.get(s, ()))) for s in range(n)),
            rob_actions=tuple(tuple(sorted(self.rob_actions.get(s, ()))) for s in range(n)),
            t_cop=dict(self.t_cop),
            t_rob=dict(self.t_rob),
            name=self.name,
        )


@dataclass(frozen=True)
class CompiledGame:
    """Sparse matrix form of a game: one row per playable (state, action) pair.

    Rows are grouped by state and sorted by action id, so ``ptr[s]:ptr[s+1]``
    is the slice of state ``s`` and the lowest action comes first.
    """

    n: int
    final_mask: np.ndarray
    cop_ptr: np.ndarray
    cop_pair_action: np.ndarray
    cop_matrix: sp.csr_matrix
    rob_ptr: np.ndarray
    rob_pair_action: np.ndarray
    rob_matrix: sp.csr_matrix

    @classmethod
    def build(cls, spec: GameSpec) -> "CompiledGame":
        n = spec.state_count
        final = np.zeros(n, dtype=bool)
        final[list(spec.finals)] = True
        parts = []
        for actions, table, succ in (
            (spec.cop_actions, spec.t_cop, cop_successor),
            (spec.rob_actions, spec.t_rob, rob_successor),
        ):
            ptr = np.zeros(n + 1, dtype=np.int64)
            pair_action = []
            rows, cols, vals = [], [], []
            r = 0
            for s in range(n):
                if not actions[s]:
                    raise GameError(f"state {s} has no playable action")
                for a in actions[s]:
                    d = succ(spec, s, a)
                    rows.extend([r] * len(d))
                    cols.extend(d.support)
                    vals.extend(d.probs)
                    pair_action.append(a)
                    r += 1
                ptr[s + 1] = r
            mat = sp.csr_matrix((np.array(vals, dtype=float), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))), shape=(r, n))
            mat.sum_duplicates()
            mat.sort_indices()
            parts.append((ptr, np.array(pair_action, dtype=np.int64), mat))
        (cp, ca, cm), (rp, ra, rm) = parts
        return cls(n, final, cp, ca, cm, rp, ra, rm)


# ----------------------------------------------------------------------------
# Plays


class Strategy(Protocol):
    def __call__(self, state: int, turns_remaining: int) -> int: ...


@dataclass
class Play:
    """A finite play ``i0 a0 s1 a1 s2 ...``; ``capture_turn`` is 1-based (0 when i0 is final)."""

    states: list[int] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    capture_turn: int | None = None

    @property
    def captured(self) -> bool:
        return self.capture_turn is not None

    @property
    def turns(self) -> int:
        return len(self.actions) // 2


def _draw(d: Distribution, rng: np.random.Generator) -> int:
    if len(d) == 1:
        return d.support[0]
    return int(d.support[rng.choice(len(d), p=np.asarray(d.probs) / sum(d.probs))])


def sample_play(
    spec: GameSpec,
    cop_strategy: Strategy | Callable[[int, int], int],
    rob_strategy: Strategy | Callable[[int, int], int],
    max_turns: int,
    rng_seed: int = 0,
) -> Play:
    """Simulate up to ``max_turns`` turns. Stops at the first final state."""
    rng = np.random.default_rng(rng_seed)
    s = spec.initial
    play = Play(states=[s])
    if s in spec.finals:
        play.capture_turn = 0
        return play
    for turn in range(1, max_turns + 1):
        remaining = max_turns - turn + 1
        a = cop_strategy(s, remaining)
        s = _draw(cop_successor(spec, s, a), rng)
        play.actions.append(a)
        play.states.append(s)
        if s in spec.finals:
            play.capture_turn = turn
            return play
        a = rob_strategy(s, remaining)
        s = _draw(rob_successor(spec, s, a), rng)
        play.actions.append(a)
        play.states.append(s)
        if s in spec.finals:
            play.capture_turn = turn
            return play
    return play


def first_action_strategy(spec: GameSpec, side: str = "cop") -> Callable[[int, int], int]:
    actions = spec.cop_actions if side == "cop" else spec.rob_actions
    return lambda s, k: actions[s][0]


# ----------------------------------------------------------------------------
# Reachability and relabelling


def reachable_states(spec: GameSpec) -> set[int]:
    """States some play from i0 can visit, respecting the cop/robber alternation."""
    seen = {(spec.initial, 0)}
    stack = [(spec.initial, 0)]
    while stack:
        s, side = stack.pop()
        actions, succ = (spec.cop_actions, cop_successor) if side == 0 else (spec.rob_actions, rob_successor)
        for a in actions[s]:
            for t in succ(spec, s, a).support:
                if (t, 1 - side) not in seen:
                    seen.add((t, 1 - side))
                    stack.append((t, 1 - side))
    return {s for s, _ in seen}


def relabel(spec: GameSpec, perm: Sequence[int]) -> GameSpec:
    """Rename state ``s`` to ``perm[s]``; the game is otherwise unchanged."""
    n = spec.state_count
    if sorted(perm) != list(range(n)):
        raise GameError("relabelling must be a permutation of the state ids")
    inv = [0] * n
    for s, t in enumerate(perm):
        inv[t] = s

    def move(d: Distribution) -> Distribution:
        return Distribution.of((perm[s], p) for s, p in d.exact_items())

    return GameSpec(
        states=tuple(spec.states[inv[t]] for t in range(n)),
        initial=perm[spec.initial],
        finals=frozenset(perm[f] for f in spec.finals),
        cop_action_labels=spec.cop_action_labels,
        rob_action_labels=spec.rob_action_labels,
        cop_actions=tuple(spec.cop_actions[inv[t]] for t in range(n)),
        rob_actions=tuple(spec.rob_actions[inv[t]] for t in range(n)),
        t_cop={(perm[s], a): move(d) for (s, a), d in spec.t_cop.items()},
        t_rob={(perm[s], a): move(d) for (s, a), d in spec.t_rob.items()},
        name=spec.name,
    )


# ----------------------------------------------------------------------------
# Serialization


def _token(x: Hashable) -> Any:
    if isinstance(x, tuple):
        return [_token(v) for v in x]
    return x


def _untoken(x: Any) -> Hashable:
    if isinstance(x, list):
        return tuple(_untoken(v) for v in x)
    return x


def _prob_out(p: Fraction) -> Any:
    return float(p) if p.denominator == 1 or Fraction(repr(float(p))) == p else f"{p.numerator}/{p.denominator}"


def _prob_in(x: Any) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    return as_fraction(x)


def to_dict(spec: GameSpec) -> dict[str, Any]:
    return {
        "name": spec.name,
        "states": [
            {"cop": _token(m.cop), "rob": _token(m.rob), "other": _token(m.other), "display": m.display}
            for m in spec.states
        ],
        "initial": spec.initial,
        "finals": sorted(spec.finals),
        "cop_action_labels": list(spec.cop_action_labels),
        "rob_action_labels": list(spec.rob_action_labels),
        "cop_actions": [list(a) for a in spec.cop_actions],
        "rob_actions": [list(a) for a in spec.rob_actions],
        "t_cop": [[s, a, t, _prob_out(p)] for (s, a), d in sorted(spec.t_cop.items()) for t, p in d.exact_items()],
        "t_rob": [[s, a, t, _prob_out(p)] for (s, a), d in sorted(spec.t_rob.items()) for t, p in d.exact_items()],
    }


def from_dict(doc: Mapping[str, Any]) -> GameSpec:
    """Inverse of :func:`to_dict`. States may also be given as plain strings."""
    states = []
    for i, st in enumerate(doc["states"]):
        if isinstance(st, Mapping):
            states.append(StateMeta(_untoken(st.get("cop")), _untoken(st.get("rob")), _untoken(st.get("other")), st.get("display", "")))
        else:
            states.append(StateMeta(i, None, None, str(st)))
    if not states:
        raise GameError("a game needs at least one state")
    cop_labels = doc.get("cop_action_labels") or [str(a) for a in range(1 + max((a for acts in doc["cop_actions"] for a in acts), default=0))]
    rob_labels = doc.get("rob_action_labels") or [str(a) for a in range(1 + max((a for acts in doc["rob_actions"] for a in acts), default=0))]

    def kernels(entries: Iterable[Sequence[Any]]) -> dict[tuple[int, int], Distribution]:
        acc: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
        for s, a, t, p in entries:
            acc.setdefault((int(s), int(a)), []).append((int(t), _prob_in(p)))
        return {k: Distribution.of(v) for k, v in acc.items()}

    return GameSpec(
        states=tuple(states),
        initial=int(doc["initial"]),
        finals=frozenset(int(f) for f in doc.get("finals", [])),
        cop_action_labels=tuple(cop_labels),
        rob_action_labels=tuple(rob_labels),
        cop_actions=tuple(tuple(sorted(int(a) for a in acts)) for acts in doc["cop_actions"]),
        rob_actions=tuple(tuple(sorted(int(a) for a in acts)) for acts in doc["rob_actions"]),
        t_cop=kernels(doc.get("t_cop", [])),
        t_rob=kernels(doc.get("t_rob", [])),
        name=doc.get("name", ""),
    )


def dumps(spec: GameSpec) -> str:
    return json.dumps(to_dict(spec), indent=1)


def loads(text: str) -> GameSpec:
    return from_dict(json.loads(text))
