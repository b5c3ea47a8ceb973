"""Reduction of a game to a simple stochastic game (SSG) and an independent SSG value iteration.

Vertex kinds: ``max`` (cops to move), ``min`` (robber to move), ``random``
(one per state-action pair, carrying the kernel) and the single ``target``
that absorbs every final state.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .game import GameSpec, check_valid, cop_successor, rob_successor

logger = logging.getLogger(__name__)

Kind = Literal["max", "min", "random", "target"]


@dataclass
class SsgGame:
    """Directed game graph; ``probs[v]`` is aligned with ``succ[v]`` for random vertices."""

    names: list[str]
    kinds: list[Kind]
    succ: list[list[int]]
    probs: list[list[Fraction] | None]
    target: int = 0
    image: dict[tuple[int, str], int] = field(default_factory=dict)
    initial: int | None = None

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SsgGame):
            return NotImplemented
        return (
            self.names == other.names
            and self.kinds == other.kinds
            and self.succ == other.succ
            and self.probs == other.probs
            and self.target == other.target
            and self.initial == other.initial
        )

    def check(self) -> None:
        if self.kinds[self.target] != "target" or self.kinds.count("target") != 1:
            raise ValueError("exactly one target vertex is required")
        if self.succ[self.target] != [self.target]:
            raise ValueError("the target must carry a single self-loop")
        for v, kind in enumerate(self.kinds):
            if not self.succ[v]:
                raise ValueError(f"vertex {v} ({self.names[v]}) has no successor")
            if kind == "random":
                p = self.probs[v]
                if p is None or len(p) != len(self.succ[v]) or abs(sum(p) - 1) > 1e-9 or any(x <= 0 for x in p):
                    raise ValueError(f"random vertex {v} ({self.names[v]}) has an invalid distribution")


def to_ssg(spec: GameSpec) -> SsgGame:
    """Compile a game: max/min vertex per non-final state, random vertex per playable pair.

    ``image[(s, "cop")]`` / ``image[(s, "rob")]`` give the vertex of state
    ``s`` with the cops / robber to move; final states map to the target.
    """
    check_valid(spec)
    names: list[str] = ["t"]
    kinds: list[Kind] = ["target"]
    image: dict[tuple[int, str], int] = {}
    for s in range(spec.state_count):
        for side, kind in (("cop", "max"), ("rob", "min")):
            if s in spec.finals:
                image[(s, side)] = 0
            else:
                image[(s, side)] = len(names)
                names.append(f"{spec.display(s)}/{side}")
                kinds.append(kind)
    succ: list[list[int]] = [[] for _ in names]
    probs: list[list[Fraction] | None] = [None for _ in names]
    succ[0] = [0]
    for s in range(spec.state_count):
        if s in spec.finals:
            continue
        for side, other, actions, kernel, labels in (
            ("cop", "rob", spec.cop_actions[s], cop_successor, spec.cop_action_labels),
            ("rob", "cop", spec.rob_actions[s], rob_successor, spec.rob_action_labels),
        ):
            v = image[(s, side)]
            for a in actions:
                merged: dict[int, Fraction] = {}
                for t, p in kernel(spec, s, a).exact_items():
                    u = image[(t, other)]
                    merged[u] = merged.get(u, Fraction(0)) + p
                r = len(names)
                names.append(f"{spec.display(s)}/{side}/{labels[a]}")
                kinds.append("random")
                order = sorted(merged)
                succ.append(order)
                probs.append([merged[u] for u in order])
                succ[v].append(r)
    game = SsgGame(names, kinds, succ, probs, 0, image, image[(spec.initial, "cop")])
    game.check()
    return game


@dataclass
class SsgSolution:
    values: np.ndarray
    max_strategy: dict[int, int]
    min_strategy: dict[int, int]
    iterations: int
    converged: bool
    residual: float


def ssg_value(game: SsgGame, epsilon: float = 1e-12, max_iter: int = 1_000_000) -> SsgSolution:
    """Value iteration from below: 0 everywhere except ``val(t) = 1``.

    Stops when the sup-norm change is at most ``epsilon`` and the geometric
    tail estimate is too (the same rule as the game solver); strategies pick
    the lowest-index successor attaining the optimum.
    """
    game.check()
    n = len(game)
    kinds = np.array(game.kinds)
    rows, cols, vals = [], [], []
    for v in range(n):
        if game.kinds[v] == "random":
            rows += [v] * len(game.succ[v])
            cols += game.succ[v]
            vals += [float(p) for p in game.probs[v]]
    rand = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    rand_mask = kinds == "random"

    def seg(kind: str):
        vs = np.flatnonzero(kinds == kind)
        ptr = np.zeros(len(vs) + 1, dtype=np.int64)
        flat = []
        for i, v in enumerate(vs):
            flat += game.succ[v]
            ptr[i + 1] = len(flat)
        return vs, ptr, np.array(flat, dtype=np.int64)

    max_v, max_ptr, max_succ = seg("max")
    min_v, min_ptr, min_succ = seg("min")

    def step(x: np.ndarray) -> np.ndarray:
        y = np.zeros(n)
        y[game.target] = 1.0
        r = rand @ x
        y[rand_mask] = r[rand_mask]
        if len(max_v):
            y[max_v] = np.maximum.reduceat(x[max_succ], max_ptr[:-1])
        if len(min_v):
            y[min_v] = np.minimum.reduceat(x[min_succ], min_ptr[:-1])
        return y

    x = np.zeros(n)
    x[game.target] = 1.0
    prev_res = None
    converged = False
    it = 0
    while it < max_iter:
        y = step(x)
        res = float(np.max(np.abs(y - x)))
        x = y
        it += 1
        if res == 0.0 or (res <= epsilon and prev_res and res < prev_res and res * (res / prev_res) / (1 - res / prev_res) <= epsilon):
            converged = True
            break
        prev_res = res
    if not converged:
        logger.warning("ssg_value: no convergence after %d sweeps", it)
    residual = float(np.max(np.abs(step(x) - x)))

    def pick(vs, sign):
        out = {}
        for v in vs:
            succ = game.succ[v]
            vals_ = np.array([x[u] for u in succ]) * sign
            best = vals_.max()
            out[int(v)] = int(succ[int(np.flatnonzero(vals_ >= best - 1e-12)[0])])
        return out

    return SsgSolution(x, pick(max_v, 1.0), pick(min_v, -1.0), it, converged, residual)


# ----------------------------------------------------------------------------
# Export


_SHAPES = {"max": "box", "min": "diamond", "random": "circle", "target": "doublecircle"}


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(game: SsgGame) -> str:
    out = ["digraph ssg {"]
    for v in range(len(game)):
        out.append(f'  v{v} [label="{_dot_escape(game.names[v])}", shape={_SHAPES[game.kinds[v]]}];')
    for v in range(len(game)):
        for i, u in enumerate(game.succ[v]):
            if game.kinds[v] == "random":
                out.append(f'  v{v} -> v{u} [label="{game.probs[v][i]}"];')
            else:
                out.append(f"  v{v} -> v{u};")
    out.append("}")
    return "\n".join(out) + "\n"


def to_structured(game: SsgGame) -> str:
    doc = {
        "target": game.target,
        "initial": game.initial,
        "partition": [{"id": v, "kind": game.kinds[v], "name": game.names[v]} for v in range(len(game))],
        "edges": [[v, u] for v in range(len(game)) for u in game.succ[v]],
        "distributions": [
            [v, u, str(p)] for v in range(len(game)) if game.probs[v] is not None for u, p in zip(game.succ[v], game.probs[v])
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def export_ssg(game: SsgGame, format: Literal["dot", "structured"] = "structured") -> str:
    if format == "dot":
        return to_dot(game)
    if format == "structured":
        return to_structured(game)
    raise ValueError(f"unknown SSG format {format!r}")


def parse_ssg(text: str) -> SsgGame:
    """Inverse of the structured export."""
    doc = json.loads(text)
    part = sorted(doc["partition"], key=lambda d: d["id"])
    n = len(part)
    succ: list[list[int]] = [[] for _ in range(n)]
    for v, u in doc["edges"]:
        succ[v].append(u)
    probs: list[list[Fraction] | None] = [None] * n
    for v, u, p in doc["distributions"]:
        if probs[v] is None:
            probs[v] = []
        probs[v].append(Fraction(p))
    game = SsgGame([d["name"] for d in part], [d["kind"] for d in part], succ, probs, doc["target"], {}, doc.get("initial"))
    game.check()
    return game
