"""Finite reflexive undirected graphs and the path machinery used by the game builders."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence


class GraphError(ValueError):
    """Raised for malformed graph input or invalid vertex references."""


Edge = tuple[int, int]


def _norm(u: int, v: int) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Undirected graph on vertices ``0..vertex_count-1``.

    Self-loops may be stored explicitly, but every neighbourhood query uses the
    reflexive view, so ``v in graph.closed_neighborhood(v)`` always holds.
    """

    vertex_count: int
    edges: frozenset[Edge] = frozenset()
    labels: tuple[str, ...] | None = None
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.vertex_count < 1:
            raise GraphError("a graph needs at least one vertex")
        normed = set()
        for u, v in self.edges:
            for x in (u, v):
                if not 0 <= x < self.vertex_count:
                    raise GraphError(f"edge ({u}, {v}) references vertex {x} outside [0, {self.vertex_count})")
            normed.add(_norm(u, v))
        object.__setattr__(self, "edges", frozenset(normed))
        if self.labels is not None and len(self.labels) != self.vertex_count:
            raise GraphError("labels must name every vertex")
        adj: list[set[int]] = [{v} for v in range(self.vertex_count)]
        for u, v in normed:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels else str(v)

    def closed_neighborhood(self, v: int) -> tuple[int, ...]:
        """Sorted N[v], which always contains ``v``."""
        self._check(v)
        return self._adj[v]

    def neighbors(self, v: int) -> tuple[int, ...]:
        """Open neighbourhood N(v)."""
        return tuple(u for u in self.closed_neighborhood(v) if u != v)

    def incident_edges(self, v: int) -> frozenset[Edge]:
        """E_v: every edge with ``v`` as an endpoint, including the reflexive loop."""
        return frozenset(_norm(v, u) for u in self.closed_neighborhood(v))

    def reflexive_edges(self) -> frozenset[Edge]:
        return self.edges | {(v, v) for v in self.vertices}

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.closed_neighborhood(u)

    def is_connected(self) -> bool:
        return len(bfs_distances(self, 0)) == self.vertex_count

    def _check(self, v: int) -> None:
        if not (isinstance(v, (int,)) and 0 <= v < self.vertex_count):
            raise GraphError(f"invalid vertex {v!r} for a graph with {self.vertex_count} vertices")


def closed_neighborhood(g: Graph, v: int) -> frozenset[int]:
    return frozenset(g.closed_neighborhood(v))


def parse_edge_list(text: str | Iterable[str]) -> Graph:
    """Parse the edge-list format: vertex count, then one ``u v`` pair per line.

    Blank lines and lines starting with ``#`` are skipped.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    n = None
    edges: set[Edge] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 1:
                raise GraphError(f"line {lineno}: expected a single vertex count, got {line!r}")
            try:
                n = int(parts[0])
            except ValueError:
                raise GraphError(f"line {lineno}: vertex count {parts[0]!r} is not an integer") from None
            if n < 1:
                raise GraphError(f"line {lineno}: vertex count must be positive")
            continue
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer vertex in {line!r}") from None
        for x in (u, v):
            if not 0 <= x < n:
                raise GraphError(f"line {lineno}: vertex {x} out of range [0, {n})")
        edges.add(_norm(u, v))
    if n is None:
        raise GraphError("empty edge list: missing vertex count")
    return Graph(n, frozenset(edges))


def format_edge_list(g: Graph) -> str:
    out = [str(g.vertex_count)]
    out += [f"{u} {v}" for u, v in sorted(g.edges)]
    return "\n".join(out) + "\n"


def elementary_paths_from(g: Graph, start: int, max_len: int | None = None) -> list[tuple[int, ...]]:
    """All simple paths from ``start`` with at most ``max_len`` edges, lexicographic order.

    The length-0 path ``(start,)`` is included.
    """
    g._check(start)
    if max_len is None:
        max_len = g.vertex_count - 1
    if max_len < 0:
        raise GraphError("max_len must be nonnegative")
    paths: list[tuple[int, ...]] = []

    def extend(path: list[int], seen: set[int]) -> None:
        paths.append(tuple(path))
        if len(path) - 1 == max_len:
            return
        for u in g.neighbors(path[-1]):
            if u not in seen:
                path.append(u)
                seen.add(u)
                extend(path, seen)
                seen.remove(u)
                path.pop()

    extend([start], {start})
    return paths


def path_edges(path: Sequence[int]) -> list[Edge]:
    return [_norm(a, b) for a, b in zip(path, path[1:])]


def bfs_distances(g: Graph, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in g.neighbors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


@dataclass(frozen=True)
class WeightedDigraphView:
    """A graph with nonnegative edge weights ``-ln q(e)``; ``q = 0`` maps to ``inf``."""

    base: Graph
    weight: Callable[[Edge], float]

    @classmethod
    def from_survival(cls, base: Graph, survival: Callable[[Edge], float]) -> "WeightedDigraphView":
        def weight(e: Edge) -> float:
            q = float(survival(_norm(*e)))
            if not 0.0 <= q <= 1.0:
                raise GraphError(f"survival probability {q} on edge {e} outside [0, 1]")
            return math.inf if q == 0.0 else -math.log(q)

        return cls(base, weight)


def shortest_distances(view: WeightedDigraphView, source: int) -> list[float]:
    """Dijkstra over nonnegative weights; edges of infinite weight are never relaxed."""
    g = view.base
    g._check(source)
    dist = [math.inf] * g.vertex_count
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * g.vertex_count
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u in g.neighbors(v):
            w = view.weight(_norm(v, u))
            if w < 0:
                raise GraphError(f"negative weight on edge {(v, u)}")
            if math.isinf(w):
                continue
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def max_product_survival(g: Graph, weights: WeightedDigraphView, source: int) -> list[float]:
    """Per target, the best product of survival probabilities over paths from ``source``.

    Unreachable targets (every route crosses a ``q = 0`` edge) get 0; the
    source itself gets 1 from the empty path.
    """
    if weights.base is not g:
        weights = WeightedDigraphView(g, weights.weight)
    return [math.exp(-d) if not math.isinf(d) else 0.0 for d in shortest_distances(weights, source)]


def iter_connected_graphs(max_vertices: int) -> Iterator[Graph]:
    """Isomorph-free connected graphs with 1..max_vertices vertices (networkx graph atlas)."""
    from networkx.generators.atlas import graph_atlas_g

    if max_vertices > 7:
        raise GraphError("the graph atlas only covers up to 7 vertices")
    import networkx as nx

    for h in graph_atlas_g():
        n = h.number_of_nodes()
        if 1 <= n <= max_vertices and nx.is_connected(h):
            yield Graph(n, frozenset(_norm(u, v) for u, v in h.edges()))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, frozenset(_norm(i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def empty_graph(n: int) -> Graph:
    return Graph(n)
