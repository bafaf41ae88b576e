"""Exact brute-force oracle for list-homomorphisms.

Everything here is a depth-first search over vertices in canonical order with
values tried in canonical target order, maintaining arc consistency on
bitmask domains.  Arc consistency only removes values that take part in no
solution, so solutions still come out in lexicographic order.
"""
from __future__ import annotations

from collections import deque
from typing import Callable, Iterator, Mapping, Sequence

from .errors import OracleBudgetExceeded, SchemaError, Unsatisfiable
from .structures import Assignment, Instance, connected_components, weighted_distance

DEFAULT_NODE_BUDGET = 10**7
_TIE_TOL = 1e-12


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


class ListCSP:
    """Binary CSP whose every constraint is "values adjacent in H".

    ``nbrs[v]`` lists the constrained partners of variable ``v`` (no self
    entries), ``domains[v]`` is a bitmask over target vertices and
    ``compat[x]`` the bitmask of target vertices adjacent to ``x``.
    """

    def __init__(self, nbrs: Sequence[Sequence[int]], domains: Sequence[int],
                 compat: Sequence[int], budget: int = DEFAULT_NODE_BUDGET):
        self.nbrs = [tuple(u for u in nb) for nb in nbrs]
        self.domains = list(domains)
        self.compat = tuple(compat)
        self.budget = budget
        self.nodes = 0
        h = len(self.compat)
        if h <= 12:
            table = [0] * (1 << h)
            for mask in range(1, 1 << h):
                low = mask & -mask
                table[mask] = table[mask ^ low] | self.compat[low.bit_length() - 1]
            self._support = table.__getitem__
        else:
            cache: dict[int, int] = {}

            def support(mask):
                if mask not in cache:
                    s = 0
                    for x in _bits(mask):
                        s |= self.compat[x]
                    cache[mask] = s
                return cache[mask]
            self._support = support

    @classmethod
    def for_instance(cls, instance: Instance, budget: int = DEFAULT_NODE_BUDGET) -> "ListCSP":
        G, H = instance.graph, instance.target
        nbrs = [tuple(u for u in G.sorted_neighbors[v] if u != v) for v in range(G.n)]
        domains = list(instance.list_masks)
        for v in G.loops:
            domains[v] &= H.loop_mask
        return cls(nbrs, domains, H.nbr_mask, budget)

    def propagate(self, doms: list[int], changed: Sequence[int]) -> bool:
        """Arc consistency in place; False if some domain empties."""
        if any(doms[v] == 0 for v in changed):
            return False
        queue = deque(changed)
        queued = set(changed)
        support, nbrs = self._support, self.nbrs
        while queue:
            v = queue.popleft()
            queued.discard(v)
            s = support(doms[v])
            for u in nbrs[v]:
                d = doms[u]
                nd = d & s
                if nd != d:
                    if not nd:
                        return False
                    doms[u] = nd
                    if u not in queued:
                        queued.add(u)
                        queue.append(u)
        return True

    def initial(self, fixed: Mapping[int, int] | None = None) -> list[int] | None:
        doms = list(self.domains)
        if fixed:
            for v, x in fixed.items():
                doms[v] &= 1 << x
        if not self.propagate(doms, range(len(doms))):
            return None
        return doms

    def solutions(self, order: Sequence[int], doms: list[int] | None = None,
                  values: Callable[[int, int], list[int]] | None = None,
                  prune: Callable[[list[int]], bool] | None = None) -> Iterator[list[int]]:
        """Yield domain vectors whose ``order`` variables are all singletons.

        ``values(v, mask)`` gives the value order (default ascending) and
        ``prune(doms)`` cuts a branch after propagation.
        """
        if doms is None:
            doms = self.initial()
        if doms is None or (prune is not None and prune(doms)):
            return
        if not order:
            yield doms
            return
        values = values or (lambda v, mask: _bits(mask))
        last = len(order) - 1
        stack = [(0, doms, iter(values(order[0], doms[order[0]])))]
        while stack:
            depth, cur, it = stack[-1]
            x = next(it, None)
            if x is None:
                stack.pop()
                continue
            self.nodes += 1
            if self.nodes > self.budget:
                raise OracleBudgetExceeded(f"search exceeded {self.budget} nodes")
            v = order[depth]
            nd = list(cur)
            nd[v] = 1 << x
            if not self.propagate(nd, (v,)):
                continue
            if prune is not None and prune(nd):
                continue
            if depth == last:
                yield nd
                continue
            nv = order[depth + 1]
            stack.append((depth + 1, nd, iter(values(nv, nd[nv]))))


def _values_of(doms: Sequence[int]) -> tuple[int, ...]:
    return tuple(d.bit_length() - 1 for d in doms)


def iter_list_homs(instance: Instance, budget: int = DEFAULT_NODE_BUDGET) -> Iterator[Assignment]:
    """Lazily enumerate list-homomorphisms in lexicographic order."""
    csp = ListCSP.for_instance(instance, budget)
    for doms in csp.solutions(range(instance.n)):
        yield _values_of(doms)


def enumerate_list_homs(instance: Instance, limit: int | None = None,
                        budget: int = DEFAULT_NODE_BUDGET) -> list[Assignment]:
    out = []
    if limit is not None and limit <= 0:
        return out
    for f in iter_list_homs(instance, budget):
        out.append(f)
        if limit is not None and len(out) >= limit:
            break
    return out


def count_list_homs(instance: Instance, budget: int = DEFAULT_NODE_BUDGET) -> int:
    """Number of list-homomorphisms, as a product over connected components."""
    csp = ListCSP.for_instance(instance, budget)
    doms = csp.initial()
    if doms is None:
        return 0
    total = 1
    for comp in connected_components(instance.graph):
        total *= sum(1 for _ in csp.solutions(comp, list(doms)))
        if total == 0:
            break
    return total


def find_list_hom(instance: Instance, partial: Mapping[int, int] | None = None,
                  budget: int = DEFAULT_NODE_BUDGET) -> Assignment | None:
    """First list-homomorphism agreeing with ``partial``, or None."""
    csp = ListCSP.for_instance(instance, budget)
    for v, x in (partial or {}).items():
        if not 0 <= v < instance.n or not 0 <= x < instance.target.n:
            raise ValueError(f"partial map entry {v}->{x} out of range")
    doms = csp.initial(partial)
    if doms is None:
        return None
    for sol in csp.solutions(range(instance.n), doms):
        return _values_of(sol)
    return None


def is_satisfiable(instance: Instance, budget: int = DEFAULT_NODE_BUDGET) -> bool:
    return find_list_hom(instance, budget=budget) is not None


def is_extendable(instance: Instance, partial: Mapping[int, int],
                  budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """True iff some list-homomorphism agrees with ``partial`` where defined."""
    return find_list_hom(instance, partial, budget) is not None


def distance_to_property(instance: Instance, f: Sequence[int], decompose: bool = True,
                         budget: int = DEFAULT_NODE_BUDGET) -> tuple[float, Assignment]:
    """Exact weighted distance from ``f`` to the nearest list-homomorphism.

    Returns the distance and the lexicographically first nearest
    homomorphism.  Branch-and-bound: a branch's bound is the weight of
    vertices whose ``f``-value has already left their domain.  One pass with
    ``f``-first value order finds the optimum, a second pass in canonical
    order under that bound finds the first minimizer.  With ``decompose``
    each connected component is solved on its own; the lexicographic
    minimum of a product of solution sets is the product of the minima.

    Raises :class:`Unsatisfiable` when no list-homomorphism exists.
    """
    n = instance.n
    if len(f) != n:
        raise ValueError("assignment does not cover V(G)")
    w = instance.weights
    csp = ListCSP.for_instance(instance, budget)
    doms = csp.initial()
    if doms is None:
        raise Unsatisfiable("instance has no list-homomorphism")
    bits = [1 << int(x) for x in f]
    groups = connected_components(instance.graph) if decompose else [list(range(n))]
    witness = list(_values_of(doms))

    for comp in groups:
        def lower(ds, comp=comp):
            return sum(w[u] for u in comp if not ds[u] & bits[u])

        def preferred(v, mask):
            vals = _bits(mask)
            if mask & bits[v]:
                vals.remove(int(f[v]))
                vals.insert(0, int(f[v]))
            return vals

        best = [float("inf")]

        def prune_phase1(ds):
            return lower(ds) >= best[0] - _TIE_TOL

        found = False
        for sol in csp.solutions(comp, list(doms), preferred, prune_phase1):
            best[0] = lower(sol)
            found = True
        if not found:
            raise Unsatisfiable("instance has no list-homomorphism")
        bound = best[0] + _TIE_TOL
        sol = next(csp.solutions(comp, list(doms), prune=lambda ds: lower(ds) > bound))
        for u in comp:
            witness[u] = sol[u].bit_length() - 1
    witness = tuple(witness)
    return weighted_distance(f, witness, w), witness


def relation_between(instance: Instance, u: int, v: int,
                     budget: int = DEFAULT_NODE_BUDGET) -> set[tuple[int, int]]:
    """All pairs ``(f(u), f(v))`` as ``f`` ranges over list-homomorphisms."""
    if u == v:
        raise SchemaError("relation_between needs two distinct vertices")
    csp = ListCSP.for_instance(instance, budget)
    doms = csp.initial()
    if doms is None:
        return set()
    comps = connected_components(instance.graph)
    for comp in comps:
        if next(csp.solutions(comp, list(doms)), None) is None:
            return set()
    scope = sorted({x for comp in comps if u in comp or v in comp for x in comp})
    rel = set()
    for x in _bits(doms[u]):
        for y in _bits(doms[v]):
            trial = list(doms)
            trial[u] &= 1 << x
            trial[v] &= 1 << y
            if not csp.propagate(trial, (u, v)):
                continue
            if next(csp.solutions(scope, trial), None) is not None:
                rel.add((x, y))
    return rel
