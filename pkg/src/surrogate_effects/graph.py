"""Path diagrams and the graph primitives every criterion is built on.

A :class:`PathDiagram` is a DAG over observed and latent vertices, optionally
carrying bidirected edges for unobserved confounding. Bidirected edges are
rewritten into explicit latent parents (``__L1``, ``__L2``, ...) before any
moralization or d-separation query, so all separation logic runs on plain DAGs.

Ancestor and descendant sets are reflexive: a vertex is its own ancestor.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import FrozenSet, Iterable, Tuple

from .exceptions import (
    CycleError,
    GraphError,
    MissingEdgeError,
    OverlapError,
    UnknownVertexError,
)

NAME_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
LATENT_PREFIX = "__L"

Edge = Tuple[str, str]


def _as_set(vertices) -> FrozenSet[str]:
    if vertices is None:
        return frozenset()
    if isinstance(vertices, str):
        return frozenset((vertices,))
    return frozenset(vertices)


@dataclass(frozen=True)
class PathDiagram:
    """Immutable path diagram.

    Parameters
    ----------
    observed, latent:
        Disjoint vertex name sets.
    directed:
        ``(tail, head)`` pairs.
    bidirected:
        Unordered pairs; stored as sorted tuples.
    """

    observed: FrozenSet[str] = frozenset()
    latent: FrozenSet[str] = frozenset()
    directed: FrozenSet[Edge] = frozenset()
    bidirected: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "observed", _as_set(self.observed))
        set_(self, "latent", _as_set(self.latent))
        set_(self, "directed", frozenset((a, b) for a, b in self.directed))
        set_(self, "bidirected", frozenset(tuple(sorted((a, b))) for a, b in self.bidirected))
        self._validate()

    def _validate(self):
        for name in self.observed | self.latent:
            if not isinstance(name, str) or not NAME_PATTERN.match(name):
                raise GraphError(f"invalid vertex name {name!r}")
        both = self.observed & self.latent
        if both:
            raise GraphError(f"vertices declared both observed and latent: {sorted(both)}")
        vertices = self.vertices
        for a, b in self.directed | self.bidirected:
            for v in (a, b):
                if v not in vertices:
                    raise UnknownVertexError(f"edge endpoint {v!r} is not a declared vertex")
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
        # computing the order raises CycleError on cyclic input
        self.topological_order

    @property
    def vertices(self) -> FrozenSet[str]:
        return self.observed | self.latent

    def is_latent(self, v: str) -> bool:
        self._require(v)
        return v in self.latent

    def has_edge(self, tail: str, head: str) -> bool:
        return (tail, head) in self.directed

    def _require(self, vertices):
        missing = _as_set(vertices) - self.vertices
        if missing:
            raise UnknownVertexError(f"unknown vertices: {sorted(missing)}")

    @cached_property
    def _parents(self):
        pa = {v: set() for v in self.vertices}
        for a, b in self.directed:
            pa[b].add(a)
        return {v: frozenset(p) for v, p in pa.items()}

    @cached_property
    def _children(self):
        ch = {v: set() for v in self.vertices}
        for a, b in self.directed:
            ch[a].add(b)
        return {v: frozenset(c) for v, c in ch.items()}

    def parents(self, v: str) -> FrozenSet[str]:
        self._require(v)
        return self._parents[v]

    def children(self, v: str) -> FrozenSet[str]:
        self._require(v)
        return self._children[v]

    def ancestors(self, vertices) -> FrozenSet[str]:
        vertices = _as_set(vertices)
        self._require(vertices)
        return _closure(vertices, self._parents)

    def descendants(self, vertices) -> FrozenSet[str]:
        vertices = _as_set(vertices)
        self._require(vertices)
        return _closure(vertices, self._children)

    @cached_property
    def topological_order(self) -> Tuple[str, ...]:
        """Kahn's algorithm; ties broken by name so the order is deterministic."""
        indegree = {v: 0 for v in self.vertices}
        children = {v: [] for v in self.vertices}
        for a, b in self.directed:
            indegree[b] += 1
            children[a].append(b)
        ready = sorted(v for v, d in indegree.items() if d == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in children[v]:
                indegree[c] -= 1
                if indegree[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != len(indegree):
            raise CycleError(_find_cycle(self.directed, set(indegree) - set(order)))
        return tuple(order)

    @cached_property
    def canonical(self) -> "PathDiagram":
        return canonicalize_latents(self)

    def __repr__(self):
        return (
            f"PathDiagram(observed={sorted(self.observed)}, latent={sorted(self.latent)}, "
            f"directed={sorted(self.directed)}, bidirected={sorted(self.bidirected)})"
        )


def _closure(start, step) -> FrozenSet[str]:
    seen = set(start)
    queue = deque(start)
    while queue:
        v = queue.popleft()
        for nxt in step[v]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


def _find_cycle(edges, candidates):
    pred = {}
    for a, b in edges:
        if a in candidates and b in candidates:
            pred.setdefault(b, []).append(a)
    # every vertex left over by Kahn's algorithm keeps a leftover parent, so
    # walking parents must revisit a vertex
    v = min(candidates)
    path, index = [], {}
    while v not in index:
        index[v] = len(path)
        path.append(v)
        v = min(pred[v])
    cycle = path[index[v]:] + [v]
    return cycle[::-1]


@dataclass(frozen=True)
class UndirectedGraph:
    vertices: FrozenSet[str]
    edges: FrozenSet[FrozenSet[str]]

    def __post_init__(self):
        object.__setattr__(self, "vertices", frozenset(self.vertices))
        object.__setattr__(self, "edges", frozenset(frozenset(e) for e in self.edges))
        for e in self.edges:
            if len(e) != 2:
                raise GraphError(f"self-loop or malformed edge {sorted(e)}")
            if not e <= self.vertices:
                raise UnknownVertexError(f"edge {sorted(e)} has undeclared endpoints")

    @cached_property
    def adjacency(self):
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        return {v: frozenset(n) for v, n in adj.items()}

    def has_edge(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, v: str) -> FrozenSet[str]:
        return self.adjacency[v]


def canonicalize_latents(g: PathDiagram) -> PathDiagram:
    """Replace every ``A <-> B`` by a fresh latent ``L`` with ``L -> A`` and ``L -> B``."""
    if not g.bidirected:
        return g
    taken = set(g.vertices)
    latent = set(g.latent)
    directed = set(g.directed)
    counter = 0
    for a, b in sorted(g.bidirected):
        counter += 1
        name = f"{LATENT_PREFIX}{counter}"
        while name in taken:
            counter += 1
            name = f"{LATENT_PREFIX}{counter}"
        taken.add(name)
        latent.add(name)
        directed.update({(name, a), (name, b)})
    return PathDiagram(observed=g.observed, latent=latent, directed=directed)


def relatives(g: PathDiagram, v: str, kind: str) -> FrozenSet[str]:
    if kind == "parents":
        return g.parents(v)
    if kind == "children":
        return g.children(v)
    if kind == "ancestors":
        return g.ancestors(v)
    if kind == "descendants":
        return g.descendants(v)
    raise ValueError(f"unknown relation {kind!r}")


def delete_outgoing(g: PathDiagram, a) -> PathDiagram:
    """Drop every directed edge whose tail is in ``a``; bidirected edges stay."""
    a = _as_set(a)
    g._require(a)
    if not a:
        return g
    return PathDiagram(
        observed=g.observed,
        latent=g.latent,
        directed={e for e in g.directed if e[0] not in a},
        bidirected=g.bidirected,
    )


def delete_edge(g: PathDiagram, i: str, j: str) -> PathDiagram:
    g._require((i, j))
    if (i, j) not in g.directed:
        raise MissingEdgeError(f"no edge {i} -> {j}")
    return PathDiagram(
        observed=g.observed,
        latent=g.latent,
        directed=g.directed - {(i, j)},
        bidirected=g.bidirected,
    )


def moralize(g: PathDiagram, s) -> UndirectedGraph:
    """Moral graph of the ancestral closure of ``s`` in the canonicalized diagram."""
    dag = g.canonical
    s = _as_set(s)
    dag._require(s)
    keep = dag.ancestors(s)
    edges = set()
    for v in keep:
        pa = dag.parents(v)
        edges.update(frozenset((p, v)) for p in pa)
        edges.update(frozenset(pair) for pair in combinations(sorted(pa), 2))
    return UndirectedGraph(keep, edges)


def _check_disjoint(a, b, c):
    for x, y in ((a, b), (a, c), (b, c)):
        common = x & y
        if common:
            raise OverlapError(f"separation arguments overlap on {sorted(common)}")


def u_separates(h: UndirectedGraph, a, b, c) -> bool:
    """True iff every path in ``h`` from ``a`` to ``b`` meets ``c``."""
    a, b, c = _as_set(a), _as_set(b), _as_set(c)
    _check_disjoint(a, b, c)
    unknown = (a | b | c) - h.vertices
    if unknown:
        raise UnknownVertexError(f"unknown vertices: {sorted(unknown)}")
    if not a or not b:
        return True
    seen = set(a)
    queue = deque(a)
    while queue:
        v = queue.popleft()
        for n in h.adjacency[v]:
            if n in b:
                return False
            if n not in seen and n not in c:
                seen.add(n)
                queue.append(n)
    return True


def d_separates(g: PathDiagram, a, b, c=frozenset()) -> bool:
    a, b, c = _as_set(a), _as_set(b), _as_set(c)
    g._require(a | b | c)
    _check_disjoint(a, b, c)
    if not a or not b:
        return True
    return u_separates(moralize(g, a | b | c), a, b, c)
