"""Dependency graphs and their closed neighborhoods.

A vertex set with symmetric adjacency.  ``N(J)`` is ``J`` together with every
vertex adjacent to some member of ``J``; all sums over index chains in
:mod:`locwp.rsums` are driven by these sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

VertexId = Hashable


class GraphError(ValueError):
    pass


def _sort_key(v):
    # ints and int tuples compare natively; fall back to repr for mixed types
    if isinstance(v, tuple):
        return (1, v)
    if isinstance(v, int):
        return (0, (v,))
    return (2, (repr(v),))


def sorted_vertices(vs: Iterable[VertexId]) -> tuple:
    return tuple(sorted(vs, key=_sort_key))


@dataclass(frozen=True)
class DependencyGraph:
    """Immutable undirected graph without self-loops.

    ``adjacency`` maps each vertex to the sorted tuple of its neighbours.
    """

    vertices: tuple
    adjacency: dict = field(repr=False)

    def __post_init__(self):
        index = {v: k for k, v in enumerate(self.vertices)}
        object.__setattr__(self, "_index", index)
        closed = {v: frozenset(self.adjacency[v]) | {v} for v in self.vertices}
        object.__setattr__(self, "_closed", closed)

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, v) -> bool:
        return v in self._index

    def adj(self, v) -> tuple:
        if v not in self._index:
            raise GraphError(f"vertex {v!r} not in graph")
        return self.adjacency[v]

    def degree(self, v) -> int:
        return len(self.adj(v))

    def index(self, v) -> int:
        return self._index[v]

    def closed_neighborhood(self, v) -> frozenset:
        return self._closed[v]

    def edges(self) -> list:
        out = []
        for v in self.vertices:
            iv = self._index[v]
            for w in self.adjacency[v]:
                if self._index[w] > iv:
                    out.append((v, w))
        return out

    def neighborhood(self, J: Iterable[VertexId]) -> tuple:
        """Closed neighborhood ``N(J)`` as a sorted tuple."""
        return sorted_vertices(self.neighborhood_set(J))

    def neighborhood_set(self, J: Iterable[VertexId]) -> frozenset:
        J = list(J)
        if not J:
            raise GraphError("neighborhood query must be non-empty")
        out = set()
        for j in J:
            if j not in self._index:
                raise GraphError(f"vertex {j!r} not in graph")
            out |= self._closed[j]
        return frozenset(out)


def build_from_edge_list(edges: Iterable[Sequence], vertices: Iterable | None = None) -> DependencyGraph:
    """Build a graph from vertex pairs.

    When ``vertices`` is given every edge endpoint must be declared in it, and
    declared isolated vertices are kept.  Otherwise the vertex set is inferred
    from the edges.  Duplicate and reversed pairs collapse to one edge.
    """
    edges = [tuple(e) for e in edges]
    declared = None
    if vertices is not None:
        declared = list(vertices)
        if len(set(declared)) != len(declared):
            raise GraphError("duplicate vertex declaration")
    adj: dict = {}
    if declared is not None:
        for v in declared:
            adj[v] = set()
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e!r} is not a pair")
        a, b = e
        for v in (a, b):
            if v not in adj:
                if declared is not None:
                    raise GraphError(f"edge {e!r} references undeclared vertex {v!r}")
                adj[v] = set()
        if a == b:
            # a self-loop adds nothing to a closed neighborhood
            continue
        adj[a].add(b)
        adj[b].add(a)
    verts = sorted_vertices(adj)
    return DependencyGraph(verts, {v: sorted_vertices(adj[v]) for v in verts})


def max_norm(a: Sequence[int], b: Sequence[int]) -> int:
    return max(abs(x - y) for x, y in zip(a, b))


def build_mdependent_lattice(T: Iterable, m: int) -> DependencyGraph:
    """Graph on ``T`` with an edge whenever two sites are within max-norm ``m``.

    Sites may be plain ints (``d = 1``) or int tuples.  Plain ints are kept as
    ints in the returned graph.
    """
    T = list(T)
    if not T:
        raise GraphError("lattice index set must be non-empty")
    if m < 0:
        raise GraphError("m must be non-negative")
    scalar = not isinstance(T[0], tuple)
    pts = [(t,) if scalar else tuple(t) for t in T]
    if len(set(pts)) != len(pts):
        raise GraphError("duplicate lattice sites")
    d = len(pts[0])
    if any(len(p) != d for p in pts):
        raise GraphError("lattice sites have mixed dimension")
    lookup = set(pts)
    offsets = [o for o in itertools.product(range(-m, m + 1), repeat=d) if any(o)]
    adj = {}
    for p in pts:
        nb = []
        for o in offsets:
            q = tuple(x + y for x, y in zip(p, o))
            if q in lookup:
                nb.append(q)
        adj[p] = nb
    unwrap = (lambda p: p[0]) if scalar else (lambda p: p)
    verts = sorted_vertices(unwrap(p) for p in pts)
    return DependencyGraph(
        verts, {unwrap(p): sorted_vertices(unwrap(q) for q in adj[p]) for p in pts}
    )


def build_ustat_graph(n: int, m: int) -> DependencyGraph:
    """Graph on nondecreasing ``m``-tuples from ``1..n``; edges join tuples sharing a value."""
    if m < 2:
        raise GraphError("U-statistic order m must be at least 2")
    if m > n:
        raise GraphError("U-statistic order m exceeds n")
    verts = list(itertools.combinations_with_replacement(range(1, n + 1), m))
    supports = {v: frozenset(v) for v in verts}
    by_value: dict = {i: [] for i in range(1, n + 1)}
    for v in verts:
        for i in supports[v]:
            by_value[i].append(v)
    adj = {}
    for v in verts:
        nb = set()
        for i in supports[v]:
            nb.update(by_value[i])
        nb.discard(v)
        adj[v] = sorted_vertices(nb)
    return DependencyGraph(tuple(verts), adj)


@dataclass
class NeighborhoodBound:
    value: int
    exact: bool
    method: str


def _chains_max(g: DependencyGraph, q: int) -> int:
    best = 0
    # search over sets, since N(i_{1:q}) only depends on the set of indices
    for v in g.vertices:
        stack = [(frozenset([v]), g.closed_neighborhood(v), 1)]
        seen = set()
        while stack:
            members, nbhd, depth = stack.pop()
            if depth == q:
                best = max(best, len(nbhd))
                continue
            key = (members, depth)
            if key in seen:
                continue
            seen.add(key)
            for w in nbhd:
                stack.append((members | {w}, nbhd | g.closed_neighborhood(w), depth + 1))
    return best


def max_neighborhood_size(g: DependencyGraph, q: int, exact: bool | None = None,
                          exact_limit: int = 2_000_000) -> NeighborhoodBound:
    """Largest ``|N(i_1..i_q)|`` over chains ``i_{j+1} in N(i_1..i_j)``.

    Exact enumeration runs when ``exact`` is true, or when ``exact`` is None and
    the crude chain count ``|V| * (maxdeg+1)^(q-1)`` is below ``exact_limit``.
    Otherwise the shortcut ``q * (maxdeg + 1)`` is returned, flagged as an
    upper bound.
    """
    if q < 1:
        raise GraphError("q must be >= 1")
    maxdeg = max((g.degree(v) for v in g.vertices), default=0)
    if exact is None:
        exact = len(g) * (maxdeg + 1) ** (q - 1) <= exact_limit
    if exact:
        return NeighborhoodBound(_chains_max(g, q), True, "exact enumeration")
    return NeighborhoodBound(min(q * (maxdeg + 1), len(g)), False, "upper bound q*(maxdeg+1)")
