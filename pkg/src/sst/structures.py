"""Combinatorial structure descriptors and their binary embeddings.

Every structure kind fixes a finite set of binary vectors (the vertex
set of its polytope).  Coordinate conventions used throughout the
package:

* graph-backed kinds index coordinates by the edge list order of the
  ``Graph``; undirected edges are normalized to ``(min, max)`` pairs,
* matchings are n x n permutation matrices flattened row-major,
* correlated k-subsets use ``2n - 1`` coordinates: the first ``n`` are
  element indicators, coordinate ``n + i`` is the product of indicators
  ``i`` and ``i + 1`` (0-based, ``0 <= i < n - 1``).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EnumerationLimitError,
    InvalidSpecError,
)

__all__ = [
    "Graph",
    "StructureKind",
    "StructureSpec",
    "embedding_dim",
    "is_vertex",
    "enumerate_vertices",
    "default_enum_limit",
    "spec_to_dict",
    "spec_from_dict",
]


def default_enum_limit() -> int:
    """Vertex-count guard for brute-force oracles; SST_MAX_ENUM overrides."""
    return int(os.environ.get("SST_MAX_ENUM", "10000"))


Vertex = np.ndarray  # binary vector of the spec's embedding dimension


class StructureKind(str, Enum):
    ONE_HOT = "one_hot"
    SUBSETS = "subsets"
    K_SUBSETS = "k_subsets"
    CORR_K_SUBSETS = "corr_k_subsets"
    MATCHING = "matching"
    SPANNING_TREE = "spanning_tree"
    ARBORESCENCE = "arborescence"


@dataclass(frozen=True)
class Graph:
    """A simple graph; the edge list order fixes the coordinate order.

    Undirected edges are normalized to ``(min, max)`` on construction.
    Self-loops and duplicate edges are rejected.
    """

    num_nodes: int
    edges: tuple = ()
    directed: bool = False

    def __post_init__(self):
        if self.num_nodes < 1:
            raise InvalidSpecError("graph needs at least one node")
        norm = []
        for e in self.edges:
            t, h = int(e[0]), int(e[1])
            if t == h:
                raise InvalidSpecError(f"self-loop on node {t}")
            if not (0 <= t < self.num_nodes and 0 <= h < self.num_nodes):
                raise InvalidSpecError(f"edge ({t},{h}) out of range")
            if not self.directed and t > h:
                t, h = h, t
            norm.append((t, h))
        if len(set(norm)) != len(norm):
            raise InvalidSpecError("duplicate edge in edge list")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def in_edges(self, node: int) -> list:
        """Indices of edges entering ``node`` (directed graphs)."""
        return [i for i, (_, h) in enumerate(self.edges) if h == node]

    def is_connected(self) -> bool:
        """Connectivity ignoring edge direction."""
        adj = [[] for _ in range(self.num_nodes)]
        for t, h in self.edges:
            adj[t].append(h)
            adj[h].append(t)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_nodes

    def reachable_from(self, root: int) -> set:
        """Nodes reachable from ``root`` along directed edges."""
        adj = [[] for _ in range(self.num_nodes)]
        for t, h in self.edges:
            adj[t].append(h)
        seen = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen


@dataclass(frozen=True)
class StructureSpec:
    """Descriptor of a finite vertex set; validated on construction."""

    kind: StructureKind
    n: Optional[int] = None
    k: Optional[int] = None
    graph: Optional[Graph] = None
    root: Optional[int] = None

    def __post_init__(self):
        kind = StructureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (
            StructureKind.ONE_HOT,
            StructureKind.SUBSETS,
            StructureKind.K_SUBSETS,
            StructureKind.CORR_K_SUBSETS,
            StructureKind.MATCHING,
        ):
            if self.n is None or self.n < 1:
                raise InvalidSpecError(f"{kind.value} requires a positive n")
            if self.graph is not None or self.root is not None:
                raise InvalidSpecError(f"{kind.value} takes no graph or root")
        if kind in (StructureKind.K_SUBSETS, StructureKind.CORR_K_SUBSETS):
            if self.k is None or not (1 <= self.k < self.n):
                raise InvalidSpecError(f"{kind.value} requires 1 <= k < n, got k={self.k}, n={self.n}")
        elif self.k is not None:
            raise InvalidSpecError(f"{kind.value} takes no cardinality k")
        if kind == StructureKind.SPANNING_TREE:
            if self.graph is None or self.graph.directed:
                raise InvalidSpecError("spanning_tree requires an undirected graph")
            if not self.graph.is_connected():
                raise InvalidSpecError("spanning_tree graph must be connected")
            if self.root is not None:
                raise InvalidSpecError("spanning_tree takes no root")
        if kind == StructureKind.ARBORESCENCE:
            if self.graph is None or not self.graph.directed:
                raise InvalidSpecError("arborescence requires a directed graph")
            if self.root is None or not (0 <= self.root < self.graph.num_nodes):
                raise InvalidSpecError("arborescence requires a valid root node")
            if self.graph.reachable_from(self.root) != set(range(self.graph.num_nodes)):
                raise InvalidSpecError("no arborescence: some node unreachable from the root")

    @property
    def dim(self) -> int:
        return embedding_dim(self)


def embedding_dim(spec: StructureSpec) -> int:
    """Ambient dimension of the spec's binary embeddings."""
    kind = spec.kind
    if kind in (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS):
        return spec.n
    if kind == StructureKind.CORR_K_SUBSETS:
        return 2 * spec.n - 1
    if kind == StructureKind.MATCHING:
        return spec.n * spec.n
    if kind in (StructureKind.SPANNING_TREE, StructureKind.ARBORESCENCE):
        return spec.graph.num_edges
    raise InvalidSpecError(f"unknown kind {kind!r}")


def _check_dim(spec: StructureSpec, x: Sequence) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != embedding_dim(spec):
        raise DimensionMismatchError(
            f"expected a vector of length {embedding_dim(spec)}, got shape {np.shape(x)}"
        )
    return x


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _edges_form_spanning_tree(graph: Graph, edge_ids: Sequence[int]) -> bool:
    if len(edge_ids) != graph.num_nodes - 1:
        return False
    uf = _UnionFind(graph.num_nodes)
    for i in edge_ids:
        t, h = graph.edges[i]
        if not uf.union(t, h):
            return False
    return True


def _edges_form_arborescence(graph: Graph, root: int, edge_ids: Sequence[int]) -> bool:
    if len(edge_ids) != graph.num_nodes - 1:
        return False
    parent = {}
    for i in edge_ids:
        t, h = graph.edges[i]
        if h == root or h in parent:
            return False
        parent[h] = t
    # every non-root has one entering edge; acyclicity <=> all chains reach root
    for v in parent:
        seen = set()
        while v != root:
            if v in seen or v not in parent:
                return False
            seen.add(v)
            v = parent[v]
    return True


def is_vertex(spec: StructureSpec, x: Sequence) -> bool:
    """True iff ``x`` is a valid binary embedding for ``spec``."""
    x = _check_dim(spec, x)
    if not np.isin(x, (0, 1)).all():
        return False
    b = x.astype(np.int64)
    kind = spec.kind
    if kind == StructureKind.ONE_HOT:
        return b.sum() == 1
    if kind == StructureKind.SUBSETS:
        return True
    if kind == StructureKind.K_SUBSETS:
        return b.sum() == spec.k
    if kind == StructureKind.CORR_K_SUBSETS:
        n = spec.n
        if b[:n].sum() != spec.k:
            return False
        return bool((b[n:] == b[: n - 1] * b[1:n]).all())
    if kind == StructureKind.MATCHING:
        m = b.reshape(spec.n, spec.n)
        return bool((m.sum(axis=0) == 1).all() and (m.sum(axis=1) == 1).all())
    if kind == StructureKind.SPANNING_TREE:
        return _edges_form_spanning_tree(spec.graph, np.flatnonzero(b))
    if kind == StructureKind.ARBORESCENCE:
        return _edges_form_arborescence(spec.graph, spec.root, np.flatnonzero(b))
    raise InvalidSpecError(f"unknown kind {kind!r}")


def _iter_vertices(spec: StructureSpec) -> Iterator[tuple]:
    kind = spec.kind
    if kind == StructureKind.ONE_HOT:
        for i in range(spec.n):
            bits = [0] * spec.n
            bits[i] = 1
            yield tuple(bits)
    elif kind == StructureKind.SUBSETS:
        yield from itertools.product((0, 1), repeat=spec.n)
    elif kind == StructureKind.K_SUBSETS:
        for sel in itertools.combinations(range(spec.n), spec.k):
            bits = [0] * spec.n
            for i in sel:
                bits[i] = 1
            yield tuple(bits)
    elif kind == StructureKind.CORR_K_SUBSETS:
        n = spec.n
        for sel in itertools.combinations(range(n), spec.k):
            bits = [0] * n
            for i in sel:
                bits[i] = 1
            pair = [bits[i] * bits[i + 1] for i in range(n - 1)]
            yield tuple(bits + pair)
    elif kind == StructureKind.MATCHING:
        n = spec.n
        for perm in itertools.permutations(range(n)):
            bits = [0] * (n * n)
            for r, c in enumerate(perm):
                bits[r * n + c] = 1
            yield tuple(bits)
    elif kind == StructureKind.SPANNING_TREE:
        g = spec.graph
        for sel in itertools.combinations(range(g.num_edges), g.num_nodes - 1):
            if _edges_form_spanning_tree(g, sel):
                bits = [0] * g.num_edges
                for i in sel:
                    bits[i] = 1
                yield tuple(bits)
    elif kind == StructureKind.ARBORESCENCE:
        g = spec.graph
        in_lists = [g.in_edges(v) for v in range(g.num_nodes) if v != spec.root]
        for combo in itertools.product(*in_lists):
            if _edges_form_arborescence(g, spec.root, combo):
                bits = [0] * g.num_edges
                for i in combo:
                    bits[i] = 1
                yield tuple(bits)
    else:
        raise InvalidSpecError(f"unknown kind {kind!r}")


def enumerate_vertices(spec: StructureSpec, limit: int = 10_000) -> list:
    """All vertices of the spec, in lexicographic bit order.

    Raises ``EnumerationLimitError`` as soon as more than ``limit``
    vertices are found; the instance is then too large for brute-force
    oracles.
    """
    out = []
    for bits in _iter_vertices(spec):
        out.append(bits)
        if len(out) > limit:
            raise EnumerationLimitError(
                f"{spec.kind.value} instance has more than limit={limit} vertices"
            )
    out.sort()
    return [np.array(bits, dtype=np.int8) for bits in out]


# --- JSON wire format -------------------------------------------------------

def spec_to_dict(spec: StructureSpec) -> dict:
    d = {"kind": spec.kind.value}
    if spec.n is not None:
        d["n"] = spec.n
    if spec.k is not None:
        d["k"] = spec.k
    if spec.graph is not None:
        d["graph"] = {
            "num_nodes": spec.graph.num_nodes,
            "edges": [list(e) for e in spec.graph.edges],
            "directed": spec.graph.directed,
        }
    if spec.root is not None:
        d["root"] = spec.root
    return d


def spec_from_dict(d: dict) -> StructureSpec:
    try:
        kind = StructureKind(d["kind"])
    except (KeyError, ValueError) as exc:
        raise InvalidSpecError(f"bad structure kind: {d.get('kind')!r}") from exc
    graph = None
    if "graph" in d:
        g = d["graph"]
        try:
            graph = Graph(
                num_nodes=int(g["num_nodes"]),
                edges=tuple((int(e[0]), int(e[1])) for e in g["edges"]),
                directed=bool(g.get("directed", False)),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise InvalidSpecError(f"malformed graph: {g!r}") from exc
    return StructureSpec(
        kind=kind,
        n=d.get("n"),
        k=d.get("k"),
        graph=graph,
        root=d.get("root"),
    )
