"""(k, l)-Minimality propagation for list-homomorphism instances.

For l = 3 every pair set S_{u,v} is materialized as an ``h x h`` boolean
block of an ``(n, n, h, h)`` tensor whose diagonal blocks hold the singleton
sets.  Triple sets are not stored: at the fixpoint a tuple survives in
S_{u,v,w} exactly when its three pair projections survive, so they are read
off the pair blocks on demand.  With k >= 2 the fixpoint condition on pairs
is path consistency through every third vertex, enforced by boolean matrix
products per pivot vertex.

For l <= 2 only singleton sets are stored and propagation is arc
consistency; pair sets are implicit (the initial pair constraint restricted to
the singleton sets).  This is the cheap mode used for very large inputs.
"""
from __future__ import annotations

from collections import deque
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import SizeGuardExceeded
from .solver import ListCSP, is_extendable  # noqa: F401  (re-exported test oracle)
from .structures import Instance

DEFAULT_SIZE_CAP = 2000
_BLOCK_BYTES = 64 * 2**20


class Finding(NamedTuple):
    kind: str  # "vertex" or "pair"
    vertices: tuple[int, ...]


def _initial_domains(instance: Instance) -> np.ndarray:
    n, h = instance.n, instance.target.n
    dom = np.zeros((n, h), dtype=bool)
    loops = np.zeros(h, dtype=bool)
    loops[list(instance.target.loops)] = True
    for v, lst in enumerate(instance.lists):
        dom[v, list(lst)] = True
    for v in instance.graph.loops:
        dom[v] &= loops
    return dom


class ConsistencyFamily:
    """Sets S_U for all U with 1 <= |U| <= l, at the propagation fixpoint.

    Tuples of S_U are indexed by the vertices of U in sorted order.
    """

    def __init__(self, instance: Instance, k: int, l: int, domains: np.ndarray,
                 pairs: np.ndarray | None):
        self.instance = instance
        self.k, self.l = k, l
        self.domains = domains
        self.pairs = pairs
        self.domains.setflags(write=False)
        if pairs is not None:
            pairs.setflags(write=False)
        self._edge = instance.target.adjacency_matrix()

    @property
    def n(self) -> int:
        return self.instance.n

    def singleton(self, v: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.domains[v]).tolist())

    def allows_vertex(self, v: int, x: int) -> bool:
        return bool(self.domains[v, x])

    def allows_pair(self, v: int, u: int, x: int, y: int) -> bool:
        if self.l < 2:
            raise ValueError("pair sets exist only for l >= 2")
        if self.pairs is not None:
            return bool(self.pairs[v, u, x, y])
        if v == u:
            return x == y and bool(self.domains[v, x])
        ok = self.domains[v, x] and self.domains[u, y]
        if ok and self.instance.graph.has_edge(v, u):
            ok = self._edge[x, y]
        return bool(ok)

    def pair_matrix(self, vs: Sequence[int], xs: Sequence[int],
                    us: Sequence[int], ys: Sequence[int]) -> np.ndarray:
        """``out[i, j]`` is True iff ``(xs[i], ys[j])`` lies in S_{vs[i], us[j]}."""
        if self.l < 2:
            raise ValueError("pair sets exist only for l >= 2")
        vs, xs, us, ys = (np.asarray(a, dtype=np.int64) for a in (vs, xs, us, ys))
        if self.pairs is not None:
            return self.pairs[vs[:, None], us[None, :], xs[:, None], ys[None, :]]
        out = self.domains[vs, xs][:, None] & self.domains[us, ys][None, :]
        out &= (vs[:, None] != us[None, :]) | (xs[:, None] == ys[None, :])
        where: dict[int, list[int]] = {}
        for j, u in enumerate(us.tolist()):
            where.setdefault(u, []).append(j)
        nbrs = self.instance.graph.neighbors
        for i, v in enumerate(vs.tolist()):
            for u in nbrs[v]:
                for j in where.get(u, ()):
                    if u != v and not self._edge[xs[i], ys[j]]:
                        out[i, j] = False
        return out

    def pair(self, v: int, u: int) -> frozenset[tuple[int, int]]:
        h = self.instance.target.n
        return frozenset((x, y) for x in range(h) for y in range(h)
                         if self.allows_pair(v, u, x, y))

    def tuples(self, U: Iterable[int]) -> frozenset[tuple[int, ...]]:
        U = sorted(set(U))
        if not 1 <= len(U) <= self.l:
            raise ValueError(f"family holds sets of size 1..{self.l}, got {len(U)}")
        if len(U) == 1:
            return frozenset((x,) for x in self.singleton(U[0]))
        if len(U) == 2:
            return self.pair(*U)
        a, b, c = U
        ab, ac, bc = self.pair(a, b), self.pair(a, c), self.pair(b, c)
        return frozenset((x, y, z) for (x, y) in ab for z in self.singleton(c)
                         if (x, z) in ac and (y, z) in bc)

    def subsets(self) -> Iterable[tuple[int, ...]]:
        for size in range(1, self.l + 1):
            yield from combinations(range(self.n), size)


def run_minimality(instance: Instance, k: int = 2, l: int = 3,
                   size_cap: int = DEFAULT_SIZE_CAP,
                   order_seed: int | None = None) -> ConsistencyFamily | None:
    """Propagate to the (k, l)-Minimality fixpoint; None means unsatisfiable.

    ``order_seed`` shuffles the initial work-list; the fixpoint does not
    depend on it.
    """
    if not 1 <= k <= l or l > 3:
        raise ValueError(f"unsupported parameters k={k}, l={l}")
    n = instance.n
    if l == 3 and n > size_cap:
        raise SizeGuardExceeded(f"(k,3)-Minimality on n={n} exceeds the cap of {size_cap}")
    dom = _initial_domains(instance)
    if not dom.any(axis=1).all():
        return None
    if l == 1:
        return ConsistencyFamily(instance, k, l, dom, None)
    dom = _arc_consistency(instance, dom)
    if dom is None:
        return None
    if l == 2:
        return ConsistencyFamily(instance, k, l, dom, None)
    rel = _initial_pairs(instance, dom)
    if k >= 2:
        rel = _path_consistency(rel, order_seed)
    else:
        rel = _singleton_triple_consistency(instance, rel)
    if rel is None:
        return None
    dom = np.einsum("vvxx->vx", rel).copy()
    return ConsistencyFamily(instance, k, l, dom, rel)


def _arc_consistency(instance: Instance, dom: np.ndarray) -> np.ndarray | None:
    csp = ListCSP.for_instance(instance)
    masks = [int(sum(1 << int(x) for x in np.flatnonzero(row))) for row in dom]
    if not csp.propagate(masks, range(instance.n)):
        return None
    out = np.zeros_like(dom)
    for v, m in enumerate(masks):
        while m:
            low = m & -m
            out[v, low.bit_length() - 1] = True
            m ^= low
    return out


def _initial_pairs(instance: Instance, dom: np.ndarray) -> np.ndarray:
    n, h = dom.shape
    rel = dom[:, None, :, None] & dom[None, :, None, :]
    edge = instance.target.adjacency_matrix()
    for u, v in instance.graph.edges:
        if u != v:
            rel[u, v] &= edge
            rel[v, u] &= edge.T
    eye = np.eye(h, dtype=bool)
    idx = np.arange(n)
    rel[idx, idx] &= eye
    return rel


def _compose_through(rel: np.ndarray, w: int) -> np.ndarray:
    """``out[u, v, x, y]``: some z has (x, z) in S_{u,w} and (z, y) in S_{w,v}."""
    n, _, h, _ = rel.shape
    right = rel[w].transpose(1, 0, 2).reshape(h, n * h).astype(np.float32)
    out = np.empty((n, n, h, h), dtype=bool)
    step = max(1, _BLOCK_BYTES // max(1, 4 * h * n * h * h))
    for start in range(0, n, step):
        stop = min(n, start + step)
        left = rel[start:stop, w].reshape((stop - start) * h, h).astype(np.float32)
        prod = (left @ right).reshape(stop - start, h, n, h)
        out[start:stop] = (prod > 0).transpose(0, 2, 1, 3)
    return out


def _path_consistency(rel: np.ndarray, order_seed: int | None) -> np.ndarray | None:
    n = rel.shape[0]
    order = list(range(n))
    if order_seed is not None:
        np.random.default_rng(order_seed).shuffle(order)
    queue = deque(order)
    queued = set(order)
    idx = np.arange(n)
    while queue:
        w = queue.popleft()
        queued.discard(w)
        new = rel & _compose_through(rel, w)
        changed = (new != rel).any(axis=(2, 3))
        if not changed.any():
            continue
        rel = new
        if not rel[idx, idx].any(axis=(1, 2)).all():
            return None
        for p in np.flatnonzero(changed.any(axis=0) | changed.any(axis=1)).tolist():
            if p not in queued:
                queued.add(p)
                queue.append(p)
    return rel


def _singleton_triple_consistency(instance: Instance, rel: np.ndarray) -> np.ndarray | None:
    """Fixpoint for k = 1, l = 3: singletons must extend into every triple."""
    n, _, h, _ = rel.shape
    idx = np.arange(n)
    base = rel.copy()
    while True:
        dom = np.einsum("vvxx->vx", rel).copy()
        if not dom.any(axis=1).all():
            return None
        ok = dom.copy()
        for u in range(n):
            others = np.array([v for v in range(n) if v != u], dtype=np.int64)
            if others.size == 0:
                continue
            ok[u] &= rel[u, others].any(axis=2).all(axis=0)
            if others.size < 2:
                continue
            ru = rel[u, others].astype(np.float32)                # (m, x, y)
            rvw = rel[np.ix_(others, others)].astype(np.float32)  # (m, m, y, z)
            # cnt[x, v, w] = #{(y, z): (x,y) in S_uv, (y,z) in S_vw, (x,z) in S_uw}
            cnt = np.einsum("vxy,vwyz,wxz->xvw", ru, rvw, ru, optimize=True)
            diag = np.eye(others.size, dtype=bool)
            ok[u] &= ((cnt > 0) | diag).all(axis=(1, 2))
        if not ok.any(axis=1).all():
            return None
        if (ok == dom).all():
            return rel
        rel = base & ok[:, None, :, None] & ok[None, :, None, :]
        rel[idx, idx] &= np.eye(h, dtype=bool)


def violations(family: ConsistencyFamily, queried: Mapping[int, int]) -> list[Finding]:
    """Violating vertices, then violating pairs, of a partial map, in canonical order."""
    items = sorted((int(v), int(x)) for v, x in queried.items())
    out = [Finding("vertex", (v,)) for v, x in items if not family.allows_vertex(v, x)]
    if family.l >= 2:
        for (v, x), (u, y) in combinations(items, 2):
            if not family.allows_pair(v, u, x, y):
                out.append(Finding("pair", (v, u)))
    return out
