"""Gap-preserving local reductions between relational structures.

A reduction turns an input ``(J, w_J, f_J)`` for Hom(B) into ``(I, w_I, f_I)``
for Hom(A).  For the simple constructions B is obtained from a base
template A by adding or removing one relation; for the variety
constructions A is obtained from B.  Every reduction returns a
:class:`ReducedInput` whose provenance records the distance factor c1, the
per-query cost c2 and the size bounds t1, t2 it promises.

Assignments of a structure are tuples of template values aligned with the
structure's universe order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as sparse_components

from .errors import OracleBudgetExceeded, SchemaError, Unsatisfiable
from .solver import DEFAULT_NODE_BUDGET
from .structures import AssignmentOracle, WeightedSampler


class Relation(NamedTuple):
    arity: int
    tuples: frozenset


@dataclass(frozen=True, eq=False)
class RelationalStructure:
    universe: tuple
    relations: Mapping[str, Relation]

    def __post_init__(self):
        if len(set(self.universe)) != len(self.universe):
            raise SchemaError("duplicate universe element")
        members = set(self.universe)
        for name, rel in self.relations.items():
            for t in rel.tuples:
                if len(t) != rel.arity:
                    raise SchemaError(f"tuple {t} of {name} does not have arity {rel.arity}", key=name)
                if not set(t) <= members:
                    raise SchemaError(f"tuple {t} of {name} leaves the universe", key=name)

    @classmethod
    def build(cls, universe: Iterable[Hashable],
              relations: Mapping[str, tuple[int, Iterable[Sequence]]]) -> "RelationalStructure":
        rels = {name: Relation(int(arity), frozenset(tuple(t) for t in tuples))
                for name, (arity, tuples) in relations.items()}
        return cls(tuple(universe), dict(sorted(rels.items())))

    @property
    def size(self) -> int:
        return len(self.universe)

    @property
    def norm(self) -> int:
        return sum(len(rel.tuples) for rel in self.relations.values())

    @property
    def index(self) -> dict:
        return {x: i for i, x in enumerate(self.universe)}

    def signature(self) -> dict[str, int]:
        return {name: rel.arity for name, rel in self.relations.items()}

    def with_relations(self, relations: Mapping[str, Relation], universe=None) -> "RelationalStructure":
        return RelationalStructure(tuple(self.universe if universe is None else universe),
                                   dict(sorted(relations.items())))

    def to_doc(self) -> dict:
        return {"universe": [_jsonable(x) for x in self.universe],
                "relations": {name: {"arity": rel.arity,
                                     "tuples": sorted([_jsonable(x) for x in t] for t in rel.tuples)}
                              for name, rel in self.relations.items()}}


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


def _hashable(x):
    if isinstance(x, list):
        return tuple(_hashable(y) for y in x)
    return x


def structure_from_doc(doc: Mapping) -> RelationalStructure:
    try:
        universe = [_hashable(x) for x in doc["universe"]]
        rels = {}
        for name, rel in doc.get("relations", {}).items():
            rels[name] = (rel["arity"], [tuple(_hashable(x) for x in t) for t in rel["tuples"]])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed structure document: {exc}") from exc
    return RelationalStructure.build(universe, rels)


THREE_LIN = RelationalStructure.build((0, 1), {
    "even": (3, [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]),
    "odd": (3, [(0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)]),
})


def linear_system(equations: Sequence[tuple[Sequence[str], int]]) -> RelationalStructure:
    """Instance over THREE_LIN for equations ``x + y + z = parity`` over GF(2)."""
    variables: dict[str, None] = {}
    even, odd = [], []
    for names, parity in equations:
        if len(names) != 3 or parity not in (0, 1):
            raise ValueError("each equation needs three variables and a parity bit")
        for x in names:
            variables.setdefault(x)
        (odd if parity else even).append(tuple(names))
    return RelationalStructure.build(variables, {"even": (3, even), "odd": (3, odd)})


# ---- exact homomorphism search ------------------------------------------------

class _HomSearch:
    """Backtracking over source elements in universe order, values in template order."""

    def __init__(self, source: RelationalStructure, template: RelationalStructure,
                 budget: int = DEFAULT_NODE_BUDGET):
        if source.signature() != template.signature():
            raise SchemaError("source and template have different signatures")
        self.n = source.size
        self.values = template.universe
        self.budget = budget
        self.nodes = 0
        idx = source.index
        # each tuple is checked when its last variable gets a value
        self.checks: list[list[tuple[tuple[int, ...], frozenset]]] = [[] for _ in range(self.n)]
        for name, rel in source.relations.items():
            allowed = template.relations[name].tuples
            for t in rel.tuples:
                pos = tuple(idx[x] for x in t)
                if pos:
                    self.checks[max(pos)].append((pos, allowed))
                elif not allowed:
                    self.checks = None  # nullary tuple with no template match
                    return

    def consistent(self, f: list, v: int) -> bool:
        return all(tuple(f[p] for p in pos) in allowed for pos, allowed in self.checks[v])

    def run(self, value_order: Callable[[int], Sequence], prune: Callable[[list, int], bool]):
        """Yield complete assignments in search order."""
        if self.checks is None:
            return
        f: list = [None] * self.n
        if self.n == 0:
            yield ()
            return
        stack = [(0, iter(value_order(0)))]
        while stack:
            v, it = stack[-1]
            x = next(it, _END)
            if x is _END:
                stack.pop()
                f[v] = None
                continue
            self.nodes += 1
            if self.nodes > self.budget:
                raise OracleBudgetExceeded(f"search exceeded {self.budget} nodes")
            f[v] = x
            if not self.consistent(f, v) or prune(f, v):
                continue
            if v == self.n - 1:
                yield tuple(f)
                continue
            stack.append((v + 1, iter(value_order(v + 1))))


_END = object()


def enumerate_homs(source: RelationalStructure, template: RelationalStructure,
                   limit: int | None = None, budget: int = DEFAULT_NODE_BUDGET) -> list[tuple]:
    search = _HomSearch(source, template, budget)
    out = []
    for f in search.run(lambda v: template.universe, lambda f, v: False):
        out.append(f)
        if limit is not None and len(out) >= limit:
            break
    return out


def is_homomorphism(source: RelationalStructure, template: RelationalStructure,
                    f: Sequence) -> bool:
    if len(f) != source.size or not set(f) <= set(template.universe):
        return False
    idx = source.index
    for name, rel in source.relations.items():
        allowed = template.relations[name].tuples
        if any(tuple(f[idx[x]] for x in t) not in allowed for t in rel.tuples):
            return False
    return True


def hom_distance(source: RelationalStructure, template: RelationalStructure,
                 weights: Sequence[float], f: Sequence,
                 budget: int = DEFAULT_NODE_BUDGET) -> tuple[float, tuple]:
    """Exact weighted distance from ``f`` to Hom(source, template) and the first minimizer."""
    w = np.asarray(weights, dtype=float)
    search = _HomSearch(source, template, budget)
    def cost(g, v):
        return sum(w[u] for u in range(v + 1) if g[u] != f[u])

    best = [math.inf]

    def f_first(v):
        return [f[v]] + [x for x in template.universe if x != f[v]] if f[v] in template.universe \
            else list(template.universe)

    for g in search.run(f_first, lambda g, v: cost(g, v) >= best[0] - 1e-12):
        best[0] = cost(g, len(g) - 1)
    if math.isinf(best[0]):
        raise Unsatisfiable("no homomorphism exists")
    bound = best[0] + 1e-12
    witness = next(search.run(lambda v: template.universe, lambda g, v: cost(g, v) > bound))
    return float(best[0]), witness


def _distance(f: Sequence, g: Sequence, w: Sequence[float]) -> float:
    return float(sum(wv for a, b, wv in zip(f, g, w) if a != b))


# ---- inputs and outputs -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReductionInput:
    """An input (J, w_J, f_J) for Hom(B)."""

    structure: RelationalStructure
    weights: np.ndarray
    assignment: tuple

    @classmethod
    def create(cls, structure: RelationalStructure, assignment: Sequence,
               weights: Sequence[float] | None = None) -> "ReductionInput":
        n = structure.size
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        if len(w) != n or len(assignment) != n:
            raise SchemaError("weights and assignment must cover the universe")
        if (w < 0).any() or w.sum() <= 0:
            raise SchemaError("weights must be nonnegative with positive total")
        return cls(structure, w / w.sum(), tuple(assignment))


class Adapter:
    """Computes f_I one element at a time, charging reads of f_J to an oracle."""

    def __init__(self, oracle: AssignmentOracle, rule: Callable[[int, AssignmentOracle], object]):
        self.oracle = oracle
        self.rule = rule
        self.cache: dict[int, object] = {}
        self.max_cost = 0

    def query(self, i: int):
        if i not in self.cache:
            before = self.oracle.distinct_queries
            self.cache[i] = self.rule(i, self.oracle)
            self.max_cost = max(self.max_cost, self.oracle.distinct_queries - before)
        return self.cache[i]


@dataclass(eq=False)
class ReducedInput:
    structure: RelationalStructure
    weights: np.ndarray
    adapter: Adapter
    target: RelationalStructure
    source: RelationalStructure
    provenance: dict = field(default_factory=dict)

    def assignment(self) -> tuple:
        return tuple(self.adapter.query(i) for i in range(self.structure.size))

    def to_doc(self) -> dict:
        return {"structure": self.structure.to_doc(),
                "weights": [float(x) for x in self.weights],
                "assignment": [_jsonable(x) for x in self.assignment()],
                "target": self.target.to_doc(),
                "provenance": self.provenance}


@dataclass(frozen=True)
class PrecheckReject:
    sampled: tuple
    witness: tuple  # two sampled elements of one block with different values
    queries: int


def _provenance(case: str, params: Mapping, inp: ReductionInput, out: RelationalStructure,
                c1: float, t1: int, t2: int, randomized: bool = False, c2: int = 1) -> dict:
    return {"case": case, "params": {k: _jsonable(v) for k, v in params.items()},
            "c1": c1, "c2": c2, "randomized": randomized,
            "size_J": inp.structure.size, "norm_J": inp.structure.norm,
            "size_I": out.size, "norm_I": out.norm, "t1": t1, "t2": t2}


def _identity_adapter(inp: ReductionInput) -> Adapter:
    return Adapter(AssignmentOracle(inp.assignment), lambda i, o: o.query(i))


# ---- single-relation constructions -------------------------------------------

class SimpleCase(enum.Enum):
    REMOVE_RELATION = 1
    PERMUTE_VARIABLES = 2
    INTERSECTION = 3
    PRODUCT = 4
    PROJECTION = 6


def _spec(spec: Mapping, *keys: str):
    try:
        return [spec[k] for k in keys]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed spec: missing {exc}") from exc


def _need(rels: Mapping[str, Relation], name: str) -> Relation:
    if name not in rels:
        raise SchemaError(f"malformed spec: unknown relation {name!r}", key=name)
    return rels[name]


def _fresh_name(rels: Mapping, name: str) -> None:
    if name in rels:
        raise SchemaError(f"malformed spec: relation {name!r} already exists", key=name)


def derive_simple_template(case: SimpleCase | int, spec: Mapping,
                           base: RelationalStructure) -> RelationalStructure:
    """The structure B obtained from the base template A by ``case``."""
    case = SimpleCase(case)
    rels = dict(base.relations)
    if case is SimpleCase.REMOVE_RELATION:
        (name,) = _spec(spec, "relation")
        _need(rels, name)
        del rels[name]
    elif case is SimpleCase.PERMUTE_VARIABLES:
        src, name, perm = _spec(spec, "relation", "name", "permutation")
        rel = _need(rels, src)
        _fresh_name(rels, name)
        if sorted(perm) != list(range(rel.arity)):
            raise SchemaError("malformed spec: permutation does not match the arity")
        rels[name] = Relation(rel.arity, frozenset(tuple(t[p] for p in perm) for t in rel.tuples))
    elif case is SimpleCase.INTERSECTION:
        left, right, name = _spec(spec, "left", "right", "name")
        r, s = _need(rels, left), _need(rels, right)
        _fresh_name(rels, name)
        if r.arity != s.arity:
            raise SchemaError("malformed spec: intersection needs equal arities")
        rels[name] = Relation(r.arity, r.tuples & s.tuples)
    elif case is SimpleCase.PRODUCT:
        left, right, name = _spec(spec, "left", "right", "name")
        r, s = _need(rels, left), _need(rels, right)
        _fresh_name(rels, name)
        rels[name] = Relation(r.arity + s.arity, frozenset(a + b for a in r.tuples for b in s.tuples))
    elif case is SimpleCase.PROJECTION:
        src, name = _spec(spec, "relation", "name")
        rel = _need(rels, src)
        _fresh_name(rels, name)
        if rel.arity < 1:
            raise SchemaError("malformed spec: cannot project a nullary relation")
        rels[name] = Relation(rel.arity - 1, frozenset(t[:-1] for t in rel.tuples))
    return base.with_relations(rels)


def transform_simple(case: SimpleCase | int, spec: Mapping, base: RelationalStructure,
                     inp: ReductionInput) -> ReducedInput:
    """Reduce an input for Hom(B) to one for Hom(A), with B derived from A by ``case``."""
    case = SimpleCase(case)
    source = derive_simple_template(case, spec, base)
    J = inp.structure
    if J.signature() != source.signature():
        raise SchemaError("input structure does not match the source signature")
    rels = dict(J.relations)
    universe = list(J.universe)
    weights = inp.weights
    adapter = _identity_adapter(inp)
    n, m = J.size, J.norm
    c2 = 1
    if case is SimpleCase.REMOVE_RELATION:
        (name,) = _spec(spec, "relation")
        rels[name] = Relation(base.relations[name].arity, frozenset())
    elif case is SimpleCase.PERMUTE_VARIABLES:
        src, name, perm = _spec(spec, "relation", "name", "permutation")
        inverse = [0] * len(perm)
        for i, p in enumerate(perm):
            inverse[p] = i
        moved = frozenset(tuple(t[inverse[j]] for j in range(len(perm))) for t in rels.pop(name).tuples)
        rels[src] = Relation(rels[src].arity, rels[src].tuples | moved)
    elif case is SimpleCase.INTERSECTION:
        left, right, name = _spec(spec, "left", "right", "name")
        both = rels.pop(name).tuples
        rels[left] = Relation(rels[left].arity, rels[left].tuples | both)
        rels[right] = Relation(rels[right].arity, rels[right].tuples | both)
    elif case is SimpleCase.PRODUCT:
        left, right, name = _spec(spec, "left", "right", "name")
        cut = rels[left].arity
        prod = rels.pop(name).tuples
        rels[left] = Relation(cut, rels[left].tuples | {t[:cut] for t in prod})
        rels[right] = Relation(rels[right].arity, rels[right].tuples | {t[cut:] for t in prod})
    elif case is SimpleCase.PROJECTION:
        src, name = _spec(spec, "relation", "name")
        projected = sorted(rels.pop(name).tuples, key=repr)
        taken = set(universe)
        extended = []
        for i, t in enumerate(projected):
            fresh = f"{name}#{i}"
            while fresh in taken:
                fresh += "'"
            taken.add(fresh)
            universe.append(fresh)
            extended.append(t + (fresh,))
        rels[src] = Relation(rels[src].arity, rels[src].tuples | frozenset(extended))
        weights = np.concatenate([inp.weights, np.zeros(len(projected))])
        adapter = Adapter(AssignmentOracle(inp.assignment),
                          _projection_rule(base.relations[src], projected, J.index, base.universe, n))
        c2 = max(1, base.relations[src].arity - 1)
    I = J.with_relations(rels, universe)
    prov = _provenance(f"case-{case.value}", dict(spec), inp, I, 1.0, n + m, 2 * m, c2=c2)
    return ReducedInput(I, weights, adapter, base, source, prov)


def _projection_rule(rel: Relation, projected: Sequence[tuple], idx: Mapping, values: Sequence, n: int):
    """Fresh element i reads its tuple and takes the smallest value completing it in ``rel``.

    The value is free as far as distance goes (weight 0), but choosing a
    completing one keeps homomorphisms homomorphisms.  With no completion
    (f_J is not a homomorphism there) the first template value is used.
    """
    def rule(i: int, o: AssignmentOracle):
        if i < n:
            return o.query(i)
        head = tuple(o.query(idx[x]) for x in projected[i - n])
        return next((z for z in values if head + (z,) in rel.tuples), values[0])
    return rule


# ---- case 5: equality ---------------------------------------------------------

EQUALITY = "eq"


def equality_template(base: RelationalStructure, name: str = EQUALITY) -> RelationalStructure:
    rels = dict(base.relations)
    _fresh_name(rels, name)
    rels[name] = Relation(2, frozenset((x, x) for x in base.universe))
    return base.with_relations(rels)


def equality_blocks(inp: ReductionInput, name: str = EQUALITY) -> list[list[int]]:
    """Classes of the equivalence generated by relation ``name``, ordered by first member."""
    J = inp.structure
    idx = J.index
    pairs = [(idx[a], idx[b]) for a, b in J.relations[name].tuples]
    rows = [a for a, _ in pairs]
    cols = [b for _, b in pairs]
    graph = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(J.size, J.size))
    _, label = sparse_components(graph, directed=False)
    blocks: dict[int, list[int]] = {}
    for v, c in enumerate(label.tolist()):
        blocks.setdefault(c, []).append(v)
    return sorted(blocks.values(), key=lambda b: b[0])


def majority_distance(inp: ReductionInput, blocks: Sequence[Sequence[int]]) -> float:
    """Distance from f_J to the nearest map that is constant on every block."""
    total = 0.0
    for block in blocks:
        mass: dict = {}
        for v in block:
            mass[inp.assignment[v]] = mass.get(inp.assignment[v], 0.0) + inp.weights[v]
        total += sum(mass.values()) - max(mass.values())
    return float(total)


def contraction_distance(inp: ReductionInput, blocks: Sequence[Sequence[int]],
                         f_I: Sequence) -> float:
    """Weight of the J-variables whose value differs from their block's f_I value."""
    return float(sum(inp.weights[v] for b, block in enumerate(blocks) for v in block
                     if inp.assignment[v] != f_I[b]))


def equality_contraction(base: RelationalStructure, inp: ReductionInput, epsilon: float,
                         rng: np.random.Generator, name: str = EQUALITY,
                         c_scalar: float = 4.0) -> PrecheckReject | ReducedInput:
    """Contract the classes of relation ``name`` after a sampling pre-check.

    The pre-check samples ceil(c_scalar / eps) variables and rejects if two
    of them share a class but not a value.  Each class u of the contracted
    structure reads f_J at one representative drawn from w_J restricted to u.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    source = equality_template(base, name)
    J = inp.structure
    if J.signature() != source.signature():
        raise SchemaError("input structure does not match the source signature")
    blocks = equality_blocks(inp, name)
    block_of = np.empty(J.size, dtype=np.int64)
    for b, block in enumerate(blocks):
        block_of[block] = b
    oracle = AssignmentOracle(inp.assignment)
    s = max(1, math.ceil(round(c_scalar / epsilon, 9)))
    sample = WeightedSampler(inp.weights).sample(rng, s).tolist()
    seen: dict[int, tuple[int, object]] = {}
    for v in sample:
        x = oracle.query(v)
        b = int(block_of[v])
        if b in seen and seen[b][1] != x:
            return PrecheckReject(tuple(sample), (J.universe[seen[b][0]], J.universe[v]),
                                  oracle.distinct_queries)
        seen.setdefault(b, (v, x))

    idx = J.index
    rels = {}
    for rname, rel in J.relations.items():
        if rname == name:
            continue
        lifted = frozenset(tuple(blocks[block_of[idx[x]]][0] for x in t) for t in rel.tuples)
        rels[rname] = Relation(rel.arity, frozenset(tuple(J.universe[v] for v in t) for t in lifted))
    universe = [J.universe[block[0]] for block in blocks]
    weights = np.array([inp.weights[block].sum() for block in blocks])
    I = RelationalStructure(tuple(universe), dict(sorted(rels.items())))

    def draw(b: int, o: AssignmentOracle):
        block = blocks[b]
        w = inp.weights[block]
        if w.sum() <= 0:
            return o.query(block[0])
        return o.query(block[int(WeightedSampler(w).sample(rng, 1)[0])])

    adapter = Adapter(AssignmentOracle(inp.assignment), draw)
    prov = _provenance("case-5", {"relation": name, "epsilon": epsilon}, inp, I, 0.5,
                       J.size, J.norm, randomized=True)
    prov["precheck_samples"] = s
    prov["precheck_queries"] = oracle.distinct_queries
    return ReducedInput(I, weights, adapter, base, source, prov)


# ---- variety constructions -------------------------------------------------

@dataclass(frozen=True)
class Subalgebra:
    universe: tuple  # the larger universe A containing the template's universe B
    name: str = "sub"


@dataclass(frozen=True)
class Quotient:
    universe: tuple  # A
    mapping: Mapping  # surjection A -> B


@dataclass(frozen=True)
class Power:
    k: int


def power_structure(base: RelationalStructure, k: int, relations: Mapping[str, tuple[int, Iterable]]
                    ) -> RelationalStructure:
    """Structure on base.universe ** k with the given relations of k-tuples."""
    universe = tuple(product(base.universe, repeat=k))
    return RelationalStructure.build(universe, relations)


def derive_variety_template(kind, source: RelationalStructure) -> RelationalStructure:
    """The template A built from B for a subalgebra, quotient or power."""
    if isinstance(kind, Subalgebra):
        if not set(source.universe) <= set(kind.universe):
            raise SchemaError("malformed kind: B is not a subset of A")
        rels = dict(source.relations)
        _fresh_name(rels, kind.name)
        rels[kind.name] = Relation(1, frozenset((x,) for x in source.universe))
        return RelationalStructure(tuple(kind.universe), dict(sorted(rels.items())))
    if isinstance(kind, Quotient):
        h = dict(kind.mapping)
        if set(h) != set(kind.universe) or set(h.values()) != set(source.universe):
            raise SchemaError("malformed kind: mapping is not a surjection A -> B")
        rels = {}
        for name, rel in source.relations.items():
            pre = frozenset(t for t in product(kind.universe, repeat=rel.arity)
                            if tuple(h[x] for x in t) in rel.tuples)
            rels[name] = Relation(rel.arity, pre)
        return RelationalStructure(tuple(kind.universe), rels)
    if isinstance(kind, Power):
        k = kind.k
        if k < 1 or any(not isinstance(b, tuple) or len(b) != k for b in source.universe):
            raise SchemaError("malformed kind: power needs k >= 1 and a universe of k-tuples")
        universe = tuple(dict.fromkeys(a for b in source.universe for a in b))
        rels = {}
        for name, rel in source.relations.items():
            flat = frozenset(tuple(b[i] for i in range(k) for b in t) for t in rel.tuples)
            rels[name] = Relation(rel.arity * k, flat)
        return RelationalStructure(universe, rels)
    raise SchemaError(f"malformed kind: {kind!r}")


def variety_reduction(kind, source: RelationalStructure, inp: ReductionInput) -> ReducedInput:
    """Reduce an input for Hom(B) to one for Hom(A), with A built from B by ``kind``."""
    target = derive_variety_template(kind, source)
    J = inp.structure
    if J.signature() != source.signature():
        raise SchemaError("input structure does not match the source signature")
    n, m = J.size, J.norm
    if isinstance(kind, Subalgebra):
        rels = dict(J.relations)
        rels[kind.name] = Relation(1, frozenset((x,) for x in J.universe))
        I = J.with_relations(rels)
        prov = _provenance("subalgebra", {"name": kind.name}, inp, I, 1.0, n, m + n)
        return ReducedInput(I, inp.weights, _identity_adapter(inp), target, source, prov)
    if isinstance(kind, Quotient):
        order = {x: i for i, x in enumerate(kind.universe)}
        lift = {}
        for a, b in kind.mapping.items():
            if b not in lift or order[a] < order[lift[b]]:
                lift[b] = a
        adapter = Adapter(AssignmentOracle(inp.assignment), lambda i, o: lift[o.query(i)])
        prov = _provenance("quotient", {}, inp, J, 1.0, n, m)
        return ReducedInput(J, inp.weights, adapter, target, source, prov)
    k = kind.k
    copies = [f"{x}@{i}" for i in range(k) for x in J.universe]
    idx = J.index
    rels = {}
    for name, rel in J.relations.items():
        rels[name] = Relation(rel.arity * k, frozenset(
            tuple(copies[i * n + idx[x]] for i in range(k) for x in t) for t in rel.tuples))
    I = RelationalStructure(tuple(copies), rels)
    weights = np.tile(inp.weights, k) / k
    adapter = Adapter(AssignmentOracle(inp.assignment), lambda c, o: o.query(c % n)[c // n])
    prov = _provenance("power", {"k": k}, inp, I, 1.0 / k, k * n, m)
    return ReducedInput(I, weights, adapter, target, source, prov)


# ---- contract verification --------------------------------------------------

@dataclass
class ReductionReport:
    size_ok: bool
    norm_ok: bool
    adapter_cost_ok: bool
    homs_checked: int
    homs_preserved: int
    far_trials: int
    far_successes: int
    compliance: str  # "deterministic" or "randomized"
    c1: float
    epsilon: float | None = None
    details: list[dict] = field(default_factory=list)

    @property
    def hom_rate(self) -> float:
        return self.homs_preserved / self.homs_checked if self.homs_checked else float("nan")

    @property
    def far_rate(self) -> float:
        return self.far_successes / self.far_trials if self.far_trials else float("nan")

    @property
    def passed(self) -> bool:
        far_ok = not self.far_trials or (
            self.far_rate == 1.0 if self.compliance == "deterministic" else self.far_rate >= 0.9)
        return (self.size_ok and self.norm_ok and self.adapter_cost_ok
                and self.homs_preserved == self.homs_checked and far_ok)

    def to_doc(self) -> dict:
        return {"size_ok": self.size_ok, "norm_ok": self.norm_ok,
                "adapter_cost_ok": self.adapter_cost_ok,
                "homs_checked": self.homs_checked, "homs_preserved": self.homs_preserved,
                "far_trials": self.far_trials, "far_successes": self.far_successes,
                "far_rate": None if not self.far_trials else self.far_rate,
                "required_far_rate": 1.0 if self.compliance == "deterministic" else 0.9,
                "compliance": self.compliance, "c1": self.c1, "epsilon": self.epsilon,
                "passed": self.passed}


def verify_reduction(reduce: Callable[[ReductionInput, np.random.Generator], object],
                     structure: RelationalStructure, weights: Sequence[float] | None,
                     source: RelationalStructure, far: Sequence | None = None,
                     epsilon: float | None = None, trials: int = 1, seed: int = 0,
                     hom_limit: int = 50, budget: int = DEFAULT_NODE_BUDGET) -> ReductionReport:
    """Check a reduction's contract by exhaustive solving on a small structure.

    ``reduce(inp, rng)`` builds the reduced input (or a pre-check rejection).
    Homomorphism preservation is checked on up to ``hom_limit`` homomorphisms
    J -> B; with a far assignment ``far`` (its distance to Hom(B) is computed
    here, and ``epsilon`` defaults to it), ``trials`` constructions are
    scored: a construction succeeds when it rejects in its pre-check or when
    the exact distance of f_I is at least c1 * epsilon.
    """
    rng = np.random.default_rng(seed)
    size_ok = norm_ok = cost_ok = True
    c1 = 1.0
    randomized = False
    checked = preserved = 0

    def audit(out):
        nonlocal size_ok, norm_ok, cost_ok, c1, randomized
        if isinstance(out, PrecheckReject):
            return
        p = out.provenance
        size_ok &= p["size_I"] <= p["t1"]
        norm_ok &= p["norm_I"] <= p["t2"]
        c1 = p["c1"]
        randomized |= p["randomized"]
        out.assignment()
        cost_ok &= out.adapter.max_cost <= p["c2"]

    for g in enumerate_homs(structure, source, limit=hom_limit, budget=budget):
        out = reduce(ReductionInput.create(structure, g, weights), rng)
        audit(out)
        checked += 1
        if isinstance(out, PrecheckReject):
            continue
        preserved += is_homomorphism(out.structure, out.target, out.assignment())

    successes = runs = 0
    details = []
    if far is not None:
        base_inp = ReductionInput.create(structure, far, weights)
        dist_J, _ = hom_distance(structure, source, base_inp.weights, far, budget)
        eps = dist_J if epsilon is None else epsilon
        for t in range(trials):
            out = reduce(base_inp, np.random.default_rng(np.random.SeedSequence([seed, t])))
            audit(out)
            runs += 1
            if isinstance(out, PrecheckReject):
                successes += 1
                details.append({"trial": t, "precheck": "reject"})
                continue
            try:
                dist_I, _ = hom_distance(out.structure, out.target, out.weights, out.assignment(), budget)
            except Unsatisfiable:
                dist_I = math.inf
            ok = dist_I >= out.provenance["c1"] * eps - 1e-12
            successes += ok
            details.append({"trial": t, "dist_J": dist_J, "dist_I": dist_I, "ok": bool(ok)})
        epsilon = eps
    return ReductionReport(size_ok, norm_ok, cost_ok, checked, preserved, runs, successes,
                           "randomized" if randomized else "deterministic", c1, epsilon, details)
