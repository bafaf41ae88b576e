"""Graphs, weighted list-constrained instances, assignments and oracles.

Vertex ids are strings at the document boundary and dense integer indices
everywhere else, numbered in document order.  An assignment is a plain tuple
of target-vertex indices, one per input vertex.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError

WEIGHT_TOL = 1e-9

Assignment = tuple  # tuple[int, ...] of target indices


@dataclass(frozen=True)
class Graph:
    """Undirected graph with optional loops.

    ``edges`` holds index pairs ``(i, j)`` with ``i <= j``; a loop is ``(i, i)``.
    """

    vertices: tuple[str, ...]
    edges: frozenset[tuple[int, int]]

    @classmethod
    def build(cls, vertices: Iterable, edges: Iterable[Sequence] = ()) -> "Graph":
        names = tuple(str(v) for v in vertices)
        index = {v: i for i, v in enumerate(names)}
        if len(index) != len(names):
            dup = next(v for v in names if names.count(v) > 1)
            raise SchemaError(f"duplicate vertex {dup!r}", key=dup)
        norm = set()
        for e in edges:
            if len(e) != 2:
                raise SchemaError(f"edge {list(e)!r} is not a pair", key=str(e))
            a, b = (str(x) for x in e)
            for x in (a, b):
                if x not in index:
                    raise SchemaError(f"edge endpoint {x!r} is not a vertex", key=x)
            i, j = sorted((index[a], index[b]))
            norm.add((i, j))
        return cls(names, frozenset(norm))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        nb = [set() for _ in self.vertices]
        for i, j in self.edges:
            nb[i].add(j)
            nb[j].add(i)
        return tuple(frozenset(s) for s in nb)

    @cached_property
    def sorted_neighbors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(s)) for s in self.neighbors)

    @cached_property
    def nbr_mask(self) -> tuple[int, ...]:
        """Neighbourhood of each vertex as an int bitmask over indices."""
        return tuple(sum(1 << j for j in s) for s in self.neighbors)

    @cached_property
    def loops(self) -> frozenset[int]:
        return frozenset(i for i, j in self.edges if i == j)

    @cached_property
    def loop_mask(self) -> int:
        return sum(1 << i for i in self.loops)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def is_reflexive(self) -> bool:
        return len(self.loops) == self.n

    def is_irreflexive(self) -> bool:
        return not self.loops

    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def relabel(self, names: Sequence[str]) -> "Graph":
        """Same graph with vertex ``i`` renamed to ``names[i]``."""
        return Graph.build(names, [(names[i], names[j]) for i, j in self.edges])

    def to_doc(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [[self.vertices[i], self.vertices[j]] for i, j in self.edge_list()],
        }


TargetGraph = Graph


@dataclass(frozen=True, eq=False)
class Instance:
    """Input graph G with lists L, normalized weights w and the target H."""

    graph: Graph
    lists: tuple[frozenset[int], ...]
    weights: np.ndarray
    target: Graph

    def __post_init__(self):
        n = self.graph.n
        if len(self.lists) != n or len(self.weights) != n:
            raise SchemaError("lists and weights must cover every vertex of G")
        for v, lst in enumerate(self.lists):
            name = self.graph.vertices[v]
            if not lst:
                raise SchemaError(f"empty list at {name}", key=name)
            if min(lst) < 0 or max(lst) >= self.target.n:
                raise SchemaError(f"unknown target vertex in list of {name}", key=name)
        if n and abs(float(self.weights.sum()) - 1.0) > WEIGHT_TOL:
            raise SchemaError("weights are not normalized")
        self.weights.setflags(write=False)

    @classmethod
    def create(cls, graph: Graph, target: Graph, lists=None, weights=None) -> "Instance":
        """Build an instance, defaulting to full lists and uniform weights.

        ``lists`` and ``weights`` are sequences indexed by vertex.
        """
        n = graph.n
        if lists is None:
            lists = [range(target.n)] * n
        lists = tuple(frozenset(int(x) for x in lst) for lst in lists)
        if weights is None:
            weights = np.ones(n)
        return cls(graph, lists, normalize_weights(weights, graph.vertices), target)

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def list_masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << x for x in lst) for lst in self.lists)

    @cached_property
    def min_list_value(self) -> tuple[int, ...]:
        return tuple(min(lst) for lst in self.lists)

    def is_list_hom(self, f: Sequence[int]) -> bool:
        if len(f) != self.n:
            return False
        if any(f[v] not in self.lists[v] for v in range(self.n)):
            return False
        return all(self.target.has_edge(f[u], f[v]) for u, v in self.graph.edges)

    def assignment(self, mapping: Mapping[str, str]) -> Assignment:
        """Convert a ``{G-vertex: H-vertex}`` name mapping to an assignment."""
        return assignment_from_names(self, mapping)

    def names(self, f: Sequence[int]) -> dict[str, str]:
        return {self.graph.vertices[v]: self.target.vertices[x] for v, x in enumerate(f)}

    def to_doc(self) -> dict:
        G, H = self.graph, self.target
        return {
            "H": H.to_doc(),
            "G": G.to_doc(),
            "lists": {G.vertices[v]: [H.vertices[x] for x in sorted(lst)]
                      for v, lst in enumerate(self.lists)},
            "weights": {G.vertices[v]: float(w) for v, w in enumerate(self.weights)},
        }


def normalize_weights(weights, names: Sequence[str] = ()) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).copy()
    if w.ndim != 1:
        raise SchemaError("weights must be one-dimensional")
    bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
    if bad.size:
        key = names[bad[0]] if len(names) > bad[0] else int(bad[0])
        raise SchemaError(f"negative or non-finite weight at {key}", key=key)
    total = w.sum()
    if w.size and total <= 0:
        raise SchemaError("nonpositive total weight", key="weights")
    return w / total if w.size else w


def _graph_from_doc(doc, key: str) -> Graph:
    if not isinstance(doc, dict) or "vertices" not in doc:
        raise SchemaError(f"{key} must be an object with 'vertices'", key=key)
    if not isinstance(doc["vertices"], list):
        raise SchemaError(f"{key}.vertices must be a list", key=key)
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise SchemaError(f"{key}.edges must be a list", key=key)
    return Graph.build(doc["vertices"], edges)


def load_graph(document) -> Graph:
    """Parse a bare graph document, or the ``H`` part of an instance document."""
    if isinstance(document, (str, bytes)):
        document = _parse_json(document)
    if isinstance(document, dict) and "H" in document and "vertices" not in document:
        return _graph_from_doc(document["H"], "H")
    return _graph_from_doc(document, "H")


def _parse_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


def load_instance(document) -> Instance:
    """Validate an instance document (JSON text or parsed dict).

    Missing ``weights`` means uniform; a vertex missing from ``lists`` gets
    the full vertex set of H.
    """
    if isinstance(document, (str, bytes)):
        document = _parse_json(document)
    if not isinstance(document, dict):
        raise SchemaError("instance document must be a JSON object")
    for key in ("H", "G"):
        if key not in document:
            raise SchemaError(f"missing key {key!r}", key=key)
    H = _graph_from_doc(document["H"], "H")
    G = _graph_from_doc(document["G"], "G")
    raw_lists = document.get("lists", {})
    raw_weights = document.get("weights")
    if not isinstance(raw_lists, dict):
        raise SchemaError("lists must be an object", key="lists")
    for u in raw_lists:
        if u not in G.index:
            raise SchemaError(f"list given for unknown vertex {u!r}", key=u)
    lists = []
    for u in G.vertices:
        lst = raw_lists.get(u, list(H.vertices))
        if not isinstance(lst, list):
            raise SchemaError(f"list at {u} must be an array", key=u)
        if not lst:
            raise SchemaError(f"empty list at {u}", key=u)
        idx = set()
        for x in lst:
            if str(x) not in H.index:
                raise SchemaError(f"unknown target vertex {x!r} in list at {u}", key=u)
            idx.add(H.index[str(x)])
        lists.append(frozenset(idx))
    if raw_weights is None:
        weights = np.ones(G.n)
    else:
        if not isinstance(raw_weights, dict):
            raise SchemaError("weights must be an object", key="weights")
        for u in raw_weights:
            if u not in G.index:
                raise SchemaError(f"weight given for unknown vertex {u!r}", key=u)
        weights = []
        for u in G.vertices:
            if u not in raw_weights:
                raise SchemaError(f"missing weight at {u}", key=u)
            val = raw_weights[u]
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise SchemaError(f"weight at {u} is not a number", key=u)
            weights.append(float(val))
    if G.n == 0:
        raise SchemaError("G has no vertices", key="G")
    return Instance(G, tuple(lists), normalize_weights(weights, G.vertices), H)


def assignment_from_names(instance: Instance, mapping: Mapping[str, str]) -> Assignment:
    G, H = instance.graph, instance.target
    for u in mapping:
        if u not in G.index:
            raise SchemaError(f"assignment names unknown vertex {u!r}", key=u)
    values = []
    for u in G.vertices:
        if u not in mapping:
            raise SchemaError(f"assignment missing vertex {u}", key=u)
        x = str(mapping[u])
        if x not in H.index:
            raise SchemaError(f"unknown target vertex {x!r} at {u}", key=u)
        values.append(H.index[x])
    return tuple(values)


def load_assignment(instance: Instance, document) -> Assignment:
    """Parse ``{"f": {...}}`` against ``instance``."""
    if isinstance(document, (str, bytes)):
        document = _parse_json(document)
    if not isinstance(document, dict) or not isinstance(document.get("f"), dict):
        raise SchemaError("assignment document needs an object under 'f'", key="f")
    return assignment_from_names(instance, document["f"])


def weighted_distance(f: Sequence[int], g: Sequence[int], w: Sequence[float]) -> float:
    """Total weight of the vertices on which ``f`` and ``g`` differ."""
    if len(f) != len(g) or len(f) != len(w):
        raise ValueError("domain mismatch between assignments and weights")
    return float(sum(wv for fv, gv, wv in zip(f, g, w) if fv != gv))


def restrict(instance: Instance, subset: Iterable[int]) -> Instance:
    """Induced sub-instance on ``subset`` with weights renormalized.

    Vertices keep their relative order, so local index ``i`` corresponds to
    ``sorted(subset)[i]``.
    """
    keep = sorted(set(subset))
    if not keep:
        raise ValueError("cannot restrict to an empty vertex set")
    w = instance.weights[keep]
    if w.sum() <= 0:
        raise ValueError("cannot restrict to a zero-weight vertex set")
    local = {v: i for i, v in enumerate(keep)}
    G = instance.graph
    edges = frozenset((local[i], local[j]) for i, j in G.edges if i in local and j in local)
    sub = Graph(tuple(G.vertices[v] for v in keep), edges)
    return Instance(sub, tuple(instance.lists[v] for v in keep), w / w.sum(), instance.target)


def connected_components(graph: Graph) -> list[list[int]]:
    """Components as sorted index lists, ordered by their smallest vertex."""
    seen = [False] * graph.n
    comps = []
    for s in range(graph.n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [], deque([s])
        while queue:
            v = queue.popleft()
            comp.append(v)
            for u in graph.neighbors[v]:
                if not seen[u]:
                    seen[u] = True
                    queue.append(u)
        comps.append(sorted(comp))
    return comps


def two_coloring(graph: Graph, vertices: Iterable[int] | None = None) -> list[int] | None:
    """Proper 2-colouring (0/1 per vertex), or None if some component is not bipartite.

    Within each component the smallest vertex gets colour 0.
    """
    color = [-1] * graph.n
    order = range(graph.n) if vertices is None else sorted(vertices)
    for s in order:
        if color[s] >= 0:
            continue
        color[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for u in graph.neighbors[v]:
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    queue.append(u)
                elif color[u] == color[v]:
                    return None
    return color


class WeightedSampler:
    """Draw vertex indices i.i.d. with probability proportional to their weight.

    Zero-weight vertices are never drawn.
    """

    def __init__(self, weights: Sequence[float], indices: Sequence[int] | None = None):
        w = np.asarray(weights, dtype=np.float64)
        if indices is not None:
            self.indices = np.asarray(indices, dtype=np.int64)
            w = w[self.indices]
        else:
            self.indices = np.arange(len(w))
        self.cdf = np.cumsum(w)
        if not len(self.cdf) or self.cdf[-1] <= 0:
            raise ValueError("sampler needs positive total weight")
        self.total = float(self.cdf[-1])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self.total
        pos = np.searchsorted(self.cdf, u, side="right")
        np.minimum(pos, len(self.cdf) - 1, out=pos)
        return self.indices[pos]


@dataclass
class AssignmentOracle:
    """Query-counting access to an assignment.

    Only first accesses count: ``distinct_queries`` is the size of the cache.
    """

    values: Sequence[int]
    log: list[int] = field(default_factory=list)
    cache: dict[int, int] = field(default_factory=dict)

    def query(self, v: int) -> int:
        v = int(v)
        self.log.append(v)
        if v not in self.cache:
            x = self.values[v]
            self.cache[v] = int(x) if isinstance(x, (int, np.integer)) else x
        return self.cache[v]

    def query_many(self, vs: Iterable[int]) -> list[int]:
        return [self.query(v) for v in vs]

    @property
    def distinct_queries(self) -> int:
        return len(self.cache)


class DerivedOracle:
    """Oracle for a map computed from one base-oracle query per access.

    ``index_map[v]`` is the base vertex read for local vertex ``v`` and
    ``transform(v, value)`` turns the base answer into the derived value.
    Query accounting stays with the base oracle.
    """

    def __init__(self, base, index_map: Sequence[int] | None = None, transform=None):
        self.base = base
        self.index_map = index_map
        self.transform = transform

    def query(self, v: int) -> int:
        src = v if self.index_map is None else self.index_map[v]
        value = self.base.query(src)
        return value if self.transform is None else self.transform(v, value)

    def query_many(self, vs: Iterable[int]) -> list[int]:
        return [self.query(v) for v in vs]

    @property
    def distinct_queries(self) -> int:
        return self.base.distinct_queries
