"""Planted instances, certified far assignments and Monte-Carlo measurement."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .algebra import Detail, classify
from .errors import FarUnreachable
from .minimality import DEFAULT_SIZE_CAP
from .solver import DEFAULT_NODE_BUDGET, distance_to_property
from .structures import Assignment, AssignmentOracle, Graph, Instance
from .testers import (TesterConfig, build_tester, propagate_for_testing, query_budget,
                      test, test_biarc)

PROFILE_HEADER = ("tester", "H", "n", "epsilon", "trials", "rate", "ci_lo", "ci_hi",
                  "mean_q", "max_q", "seed")
# above this size the profile propagates with implicit pairs (arc consistency)
PROFILE_FULL_PROPAGATION_MAX_N = 200


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    instance: Instance
    planted: Assignment
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FarAssignment:
    assignment: Assignment
    distance: float
    witness: Assignment


@dataclass(frozen=True)
class RejectionReport:
    tester: str
    trials: int
    rejections: int
    rate: float
    ci_lo: float
    ci_hi: float
    mean_queries: float
    max_queries: int
    budget: int
    seed: int

    @property
    def defined(self) -> bool:
        return self.trials > 0

    @property
    def within_budget(self) -> bool:
        return self.max_queries <= self.budget


def _rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def plant_instance(H: Graph, n: int, m: int, list_density: float, seed: int,
                   connected: bool = False) -> PlantedInstance:
    """Random G built around a random map g : V(G) -> V(H), which is a list-hom by construction.

    Edges join only vertices whose images are adjacent in H.  With
    ``connected`` the first n - 1 edges form a random spanning tree.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= list_density <= 1:
        raise ValueError("list density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    h = H.n
    g = rng.integers(h, size=n)
    names = [f"v{i}" for i in range(n)]
    by_image: list[list[int]] = [[] for _ in range(h)]
    for v in range(n):
        by_image[g[v]].append(v)
    nb = [[y for y in H.sorted_neighbors[x]] for x in range(h)]

    # number of unordered non-loop pairs with adjacent images
    sizes = [len(b) for b in by_image]
    available = sum(sizes[x] * sizes[y] for x in range(h) for y in nb[x] if x < y)
    available += sum(sizes[x] * (sizes[x] - 1) // 2 for x in range(h) if x in nb[x])
    if m > available:
        raise ValueError(f"cannot place {m} edges: only {available} admissible pairs")

    edges: set[tuple[int, int]] = set()
    if connected and n > 1:
        if m < n - 1:
            raise ValueError("a connected graph on n vertices needs at least n - 1 edges")
        edges |= _random_tree(rng, g, nb, h)
    while len(edges) < m:
        u = int(rng.integers(n))
        choices = nb[g[u]]
        if not choices:
            continue
        y = choices[int(rng.integers(len(choices)))]
        pool = by_image[y]
        v = pool[int(rng.integers(len(pool)))] if pool else u
        if u != v:
            edges.add((min(u, v), max(u, v)))
    G = Graph.build(names, [(names[u], names[v]) for u, v in sorted(edges)])
    lists = []
    for v in range(n):
        extra = [x for x in range(h) if x != g[v] and rng.random() < list_density]
        lists.append([int(g[v]), *extra])
    instance = Instance.create(G, H, lists)
    planted = tuple(int(x) for x in g)
    if not instance.is_list_hom(planted):
        raise AssertionError("planted map is not a list-homomorphism")
    params = {"n": n, "m": m, "list_density": list_density, "seed": seed, "connected": connected}
    return PlantedInstance(instance, planted, params)


def _random_tree(rng, g, nb, h) -> set[tuple[int, int]]:
    n = len(g)
    order = rng.permutation(n).tolist()
    placed: list[list[int]] = [[] for _ in range(h)]
    placed[g[order[0]]].append(order[0])
    edges = set()
    pending = order[1:]
    while pending:
        left = []
        for v in pending:
            opts = [y for y in nb[g[v]] if placed[y]]
            if not opts:
                left.append(v)
                continue
            counts = np.array([len(placed[y]) for y in opts], dtype=float)
            y = opts[int(rng.choice(len(opts), p=counts / counts.sum()))]
            u = placed[y][int(rng.integers(len(placed[y])))]
            edges.add((min(u, v), max(u, v)))
            placed[g[v]].append(v)
        if len(left) == len(pending):
            raise ValueError("the images of the planted map do not span a connected part of H")
        pending = left
    return edges


def _is_trivial(instance: Instance) -> bool:
    H = instance.target
    return classify(H).detail is Detail.REFLEXIVE_COMPLETE and all(
        len(lst) == H.n for lst in instance.lists)


def perturb_to_far(planted: PlantedInstance, epsilon: float, seed: int,
                   budget: int = DEFAULT_NODE_BUDGET) -> FarAssignment:
    """Move random vertices off their nearest-hom value until the exact distance reaches epsilon.

    New values come from L(v) on a first pass and from all of V(H) on a
    second pass if the first one falls short.  The final distance is
    recomputed without component decomposition as an independent check.
    """
    instance = planted.instance
    f = list(planted.planted)
    if epsilon <= 0:
        return FarAssignment(tuple(f), 0.0, tuple(f))
    if _is_trivial(instance):
        raise FarUnreachable("property is trivial: every map is a list-homomorphism")
    rng = np.random.default_rng(seed)
    h = instance.target.n
    dist, witness = 0.0, tuple(f)
    # first pass stays inside the lists, the second may leave them
    for in_list in (True, False):
        pending = 0.0  # mass moved since the last exact distance
        for v in rng.permutation(instance.n).tolist():
            if dist >= epsilon:
                break
            if instance.weights[v] <= 0 or f[v] != witness[v]:
                continue
            pool = sorted(instance.lists[v]) if in_list else range(h)
            options = [x for x in pool if x != witness[v]]
            if not options:
                continue
            f[v] = options[int(rng.integers(len(options)))]
            pending += instance.weights[v]
            # each move adds at most its weight, so skip the solver until the gap could be closed
            if dist + pending >= epsilon:
                dist, witness = distance_to_property(instance, f, budget=budget)
                pending = 0.0
        if pending > 0 and dist < epsilon:
            dist, witness = distance_to_property(instance, f, budget=budget)
    if dist < epsilon:
        raise FarUnreachable(f"could not reach distance {epsilon} (best {dist:.4f})")
    check, _ = distance_to_property(instance, f, decompose=False, budget=budget)
    if abs(check - dist) > 1e-9:
        raise AssertionError("distance certificate failed re-verification")
    return FarAssignment(tuple(f), dist, witness)


def _wilson(k: int, n: int) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_rejection(tester: str, instance: Instance, assignment: Sequence[int], trials: int,
                       seed: int, epsilon: float, **config) -> RejectionReport:
    """Run ``trials`` independently seeded tests and aggregate the outcomes.

    Trial ``t`` draws from ``SeedSequence([seed, t])``, so the result does
    not depend on the order in which trials run.
    """
    cfg = TesterConfig(epsilon=epsilon, seed=seed, **config)
    budget = query_budget(tester, instance, cfg)
    if trials <= 0:
        nan = float("nan")
        return RejectionReport(tester, 0, 0, nan, nan, nan, nan, 0, budget, seed)
    rejections, queries = 0, []
    for t in range(trials):
        oracle = AssignmentOracle(assignment)
        verdict = test(instance, oracle, cfg, tester, rng=_rng_for(seed, t))
        rejections += not verdict.accepted
        queries.append(verdict.queries)
    lo, hi = _wilson(rejections, trials)
    return RejectionReport(tester, trials, rejections, rejections / trials, lo, hi,
                           float(np.mean(queries)), int(max(queries)), budget, seed)


def query_profile(tester: str, H: Graph, sizes: Sequence[int], epsilon: float, seed: int,
                  trials: int = 5, edge_factor: int = 2, list_density: float = 0.5,
                  **config) -> list[dict]:
    """Max distinct queries on the planted hom for each n.

    For the bi-arc tester, sizes above ``PROFILE_FULL_PROPAGATION_MAX_N``
    use arc consistency with implicit pair sets; the queries made do not
    depend on which family is used when the input is a homomorphism.
    """
    run = build_tester(tester, H)
    H_label = ",".join(H.vertices)
    wrapped = classify(H).detail is Detail.COMPLETE_BIPARTITE and tester in ("auto", "k2", "bipartite")
    rows = []
    for n in sizes:
        m = min(edge_factor * n, _max_edges(H, n))
        planted = plant_instance(H, n, max(m, n - 1 if wrapped else 0), list_density,
                                 seed=int(np.random.SeedSequence([seed, n]).generate_state(1)[0]),
                                 connected=wrapped)
        instance, f = planted.instance, planted.planted
        cfg = TesterConfig(epsilon=epsilon, seed=seed, **config)
        family = None
        if run is test_biarc:
            family = propagate_for_testing(
                instance, pair_only=n > PROFILE_FULL_PROPAGATION_MAX_N, size_cap=DEFAULT_SIZE_CAP)
        rejections, queries = 0, []
        for t in range(trials):
            oracle = AssignmentOracle(f)
            rng = _rng_for(seed, n, t)
            verdict = test_biarc(instance, oracle, cfg, rng, family) if family is not None \
                else run(instance, oracle, cfg, rng)
            rejections += not verdict.accepted
            queries.append(verdict.queries)
        lo, hi = _wilson(rejections, trials)
        rows.append({"tester": tester, "H": H_label, "n": n, "epsilon": epsilon, "trials": trials,
                     "rate": rejections / trials, "ci_lo": lo, "ci_hi": hi,
                     "mean_q": float(np.mean(queries)), "max_q": int(max(queries)), "seed": seed})
    return rows


def _max_edges(H: Graph, n: int) -> int:
    # generous cap so small H never make the request infeasible in expectation
    return n * (n - 1) // 2 if H.edges else 0


def profile_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PROFILE_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in PROFILE_HEADER})
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6g}"
    return x


def fit_exponent(sizes: Sequence[int], counts: Sequence[float]) -> float:
    """Least-squares slope of log(count) against log(n)."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(counts, float)), 1)
    return float(slope)


def induced_target(H: Graph, keep: Sequence[str]) -> Graph:
    """Induced subgraph of H on ``keep`` (names), preserving H's vertex order."""
    idx = H.index
    chosen = sorted(idx[x] for x in keep)
    names = [H.vertices[i] for i in chosen]
    pos = set(chosen)
    edges = [(H.vertices[a], H.vertices[b]) for a, b in H.edges if a in pos and b in pos]
    return Graph.build(names, edges)
