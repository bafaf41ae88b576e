"""Conservative majority polymorphisms and the three-tier classification of H.

A conservative majority m on V(H) that preserves E(H) is the same thing as a
list-homomorphism from the tensor cube H x H x H to H in which triple
(x, y, z) has list {x, y, z}, shrunk to the repeated value when two entries
agree.  The search below is the solver's arc-consistent backtracking run on
that instance.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import SizeGuardExceeded
from .solver import DEFAULT_NODE_BUDGET, ListCSP
from .structures import Graph, two_coloring

DEFAULT_MAJORITY_CAP = 8

K2 = Graph.build(("a", "b"), [("a", "b")])


class Tier(enum.Enum):
    CONSTANT = "ConstantQuery"
    SUBLINEAR = "Sublinear"
    LINEAR = "LinearOnly"


class Detail(enum.Enum):
    REFLEXIVE_COMPLETE = "ReflexiveComplete"
    COMPLETE_BIPARTITE = "IrreflexiveCompleteBipartite"
    BIARC_OTHER = "BiArcOther"
    NOT_BIARC = "NotBiArc"


_TIER_OF = {
    Detail.REFLEXIVE_COMPLETE: Tier.CONSTANT,
    Detail.COMPLETE_BIPARTITE: Tier.CONSTANT,
    Detail.BIARC_OTHER: Tier.SUBLINEAR,
    Detail.NOT_BIARC: Tier.LINEAR,
}


@dataclass(frozen=True, eq=False)
class MajorityTable:
    """Total ternary operation on target indices, ``table[x, y, z]``."""

    table: np.ndarray

    def __call__(self, x: int, y: int, z: int) -> int:
        return int(self.table[x, y, z])

    def to_doc(self, H: Graph) -> list[list[str]]:
        names = H.vertices
        h = H.n
        return [[names[x], names[y], names[z], names[self(x, y, z)]]
                for x, y, z in product(range(h), repeat=3)]


@dataclass(frozen=True, eq=False)
class TrichotomyVerdict:
    tier: Tier
    detail: Detail
    majority: MajorityTable | None = None
    sides: tuple[int, ...] | None = None  # bipartition of H for the complete bipartite case

    def to_doc(self, H: Graph) -> dict:
        doc = {"tier": self.tier.value, "detail": self.detail.value}
        if self.sides is not None:
            doc["full_hom_to_K2"] = {H.vertices[x]: K2.vertices[s] for x, s in enumerate(self.sides)}
        if self.majority is not None:
            doc["majority"] = self.majority.to_doc(H)
        return doc


def _cube_instance(H: Graph, budget: int) -> tuple[ListCSP, list[int]]:
    h = H.n
    nb = H.sorted_neighbors
    loops = H.loop_mask

    def tid(x, y, z):
        return (x * h + y) * h + z

    nbrs, domains, free = [], [], []
    for x, y, z in product(range(h), repeat=3):
        t = tid(x, y, z)
        if x == y or x == z:
            dom = 1 << x
        elif y == z:
            dom = 1 << y
        else:
            dom = (1 << x) | (1 << y) | (1 << z)
            free.append(t)
        adj = [tid(a, b, c) for a in nb[x] for b in nb[y] for c in nb[z]]
        if t in adj:
            dom &= loops
            adj.remove(t)
        nbrs.append(adj)
        domains.append(dom)
    return ListCSP(nbrs, domains, H.nbr_mask, budget), free


def find_conservative_majority(H: Graph, cap: int = DEFAULT_MAJORITY_CAP,
                               budget: int = DEFAULT_NODE_BUDGET) -> MajorityTable | None:
    """First conservative majority polymorphism of H in canonical order, or None."""
    if H.n > cap:
        raise SizeGuardExceeded(f"|V(H)| = {H.n} exceeds the majority-search cap of {cap}")
    if H.n == 0:
        raise ValueError("H has no vertices")
    csp, free = _cube_instance(H, budget)
    doms = csp.initial()
    if doms is None:
        return None
    for sol in csp.solutions(free, doms):
        table = np.array([d.bit_length() - 1 for d in sol], dtype=np.int64)
        return MajorityTable(table.reshape(H.n, H.n, H.n))
    return None


def verify_majority(H: Graph, m: MajorityTable) -> list[str]:
    """Every failed identity, conservativity or edge-preservation check."""
    h = H.n
    problems = []
    for x, y in product(range(h), repeat=2):
        if not m(x, x, y) == m(x, y, x) == m(y, x, x) == x:
            problems.append(f"majority fails at ({x},{y})")
    for t in product(range(h), repeat=3):
        if m(*t) not in t:
            problems.append(f"not conservative at {t}")
    arcs = [(a, b) for a in range(h) for b in range(h) if H.has_edge(a, b)]
    for (a1, b1), (a2, b2), (a3, b3) in product(arcs, repeat=3):
        if not H.has_edge(m(a1, a2, a3), m(b1, b2, b3)):
            problems.append(f"edge not preserved at {(a1, a2, a3)}~{(b1, b2, b3)}")
    return problems


def is_reflexive_complete(H: Graph) -> bool:
    h = H.n
    return h > 0 and len(H.edges) == h * (h + 1) // 2


def complete_bipartite_sides(H: Graph) -> tuple[int, ...] | None:
    """Side (0/1) of each vertex if H is an irreflexive K_{p,q} with p, q >= 1."""
    if H.loops or H.n < 2:
        return None
    color = two_coloring(H)
    if color is None:
        return None
    p = color.count(0)
    q = H.n - p
    if q == 0 or len(H.edges) != p * q:
        return None
    return tuple(color)


def full_hom_to_k2(H: Graph) -> dict[str, str]:
    """Full homomorphism H -> K2 as a name map; the side of H's first vertex goes to ``a``."""
    sides = complete_bipartite_sides(H)
    if sides is None:
        raise ValueError("H is not an irreflexive complete bipartite graph")
    return {H.vertices[x]: K2.vertices[s] for x, s in enumerate(sides)}


def is_full_homomorphism(G: Graph, H: Graph, h: dict[str, str]) -> bool:
    idx = H.index
    for a in range(G.n):
        for b in range(a, G.n):
            ha, hb = idx[h[G.vertices[a]]], idx[h[G.vertices[b]]]
            if G.has_edge(a, b) != H.has_edge(ha, hb):
                return False
    return True


@lru_cache(maxsize=256)
def classify(H: Graph, cap: int = DEFAULT_MAJORITY_CAP) -> TrichotomyVerdict:
    """Place H in the constant / sublinear / linear query tier."""
    if H.n == 0:
        raise ValueError("H has no vertices")
    if is_reflexive_complete(H):
        return TrichotomyVerdict(Tier.CONSTANT, Detail.REFLEXIVE_COMPLETE)
    sides = complete_bipartite_sides(H)
    if sides is not None:
        return TrichotomyVerdict(Tier.CONSTANT, Detail.COMPLETE_BIPARTITE, sides=sides)
    m = find_conservative_majority(H, cap)
    if m is None:
        return TrichotomyVerdict(Tier.LINEAR, Detail.NOT_BIARC)
    return TrichotomyVerdict(Tier.SUBLINEAR, Detail.BIARC_OTHER, majority=m)


def tier_of(detail: Detail) -> Tier:
    return _TIER_OF[detail]
