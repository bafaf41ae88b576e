"""Randomized one-sided testers for list H-homomorphism.

Every tester has the signature ``tester(instance, oracle, config, rng=None)``
and returns a :class:`Verdict`.  ``oracle`` is anything with ``query(v)`` and
``distinct_queries``; derived oracles charge their reads to the base oracle,
so the query count in a verdict is always the caller's distinct count.

Sample sizes are explicit: ``ceil(c_scalar / eps)`` for scalar checks and
``ceil(c_pair * sqrt(n / eps))`` for each of the two pair-check sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol, Sequence
from weakref import WeakKeyDictionary

import numpy as np

from .algebra import (K2, Detail, classify, complete_bipartite_sides,
                      find_conservative_majority)
from .errors import NoSublinearTester
from .minimality import DEFAULT_SIZE_CAP, ConsistencyFamily, run_minimality
from .solver import is_satisfiable
from .structures import (DerivedOracle, Graph, Instance, WeightedSampler,
                         connected_components, restrict, two_coloring)

DEFAULT_C_SCALAR = 4.0
# Validated against the acceptance suite; see README ("Constants").
DEFAULT_C_PAIR = 1.0
SOLVER_PRECHECK_MAX_N = 60

ACCEPT = "accept"
REJECT = "reject"


class Oracle(Protocol):
    def query(self, v: int) -> int: ...

    @property
    def distinct_queries(self) -> int: ...


@dataclass(frozen=True)
class TesterConfig:
    epsilon: float
    seed: int = 0
    c_scalar: float = DEFAULT_C_SCALAR
    c_pair: float = DEFAULT_C_PAIR
    trials: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.c_scalar < 1 or self.c_pair < 1:
            raise ValueError("sample-size multipliers must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def with_epsilon(self, epsilon: float) -> "TesterConfig":
        return replace(self, epsilon=epsilon)

    @property
    def scalar_samples(self) -> int:
        return ceil_samples(self.c_scalar / self.epsilon)

    def pair_samples(self, n: int) -> int:
        return ceil_samples(self.c_pair * math.sqrt(n / self.epsilon))


def ceil_samples(x: float) -> int:
    # guard against 4 / 0.1 landing a hair above 40
    return max(1, math.ceil(round(x, 9)))


@dataclass
class Verdict:
    decision: str
    queries: int
    transcript: list[dict] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.decision == ACCEPT

    def to_doc(self) -> dict:
        return {"decision": self.decision, "queries": self.queries, "transcript": self.transcript}


Tester = Callable[..., Verdict]


def _rng(config: TesterConfig, rng: np.random.Generator | None) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(config.seed)


_memo: WeakKeyDictionary = WeakKeyDictionary()


def _cached(instance: Instance, key, build):
    table = _memo.setdefault(instance, {})
    if key not in table:
        table[key] = build()
    return table[key]


def _names(instance: Instance, vs) -> list[str]:
    return [instance.graph.vertices[int(v)] for v in vs]


def _sampler(instance: Instance) -> WeightedSampler:
    return _cached(instance, "sampler", lambda: WeightedSampler(instance.weights))


def _finish(oracle, decision: str, transcript: list[dict]) -> Verdict:
    return Verdict(decision, oracle.distinct_queries, transcript)


def test_reflexive_complete(instance: Instance, oracle: Oracle, config: TesterConfig,
                            rng: np.random.Generator | None = None) -> Verdict:
    """Reflexive complete H: only the lists can be violated."""
    rng = _rng(config, rng)
    sample = _sampler(instance).sample(rng, config.scalar_samples)
    masks = instance.list_masks
    step = {"step": "list-check", "epsilon": config.epsilon, "sampled": _names(instance, sample)}
    for v in sample.tolist():
        x = oracle.query(v)
        if not masks[v] >> x & 1:
            step["violation"] = instance.graph.vertices[v]
            return _finish(oracle, REJECT, [step])
    return _finish(oracle, ACCEPT, [step])


def list_wrapper(inner: Tester) -> Tester:
    """Check lists on a scalar sample, then run ``inner`` at eps/2 on the repaired map.

    The repaired map keeps f(v) when it lies in L(v) and otherwise uses the
    smallest element of L(v).
    """
    def run(instance: Instance, oracle: Oracle, config: TesterConfig,
            rng: np.random.Generator | None = None) -> Verdict:
        rng = _rng(config, rng)
        masks, fallback = instance.list_masks, instance.min_list_value
        sample = _sampler(instance).sample(rng, config.scalar_samples)
        step = {"step": "list-check", "epsilon": config.epsilon, "sampled": _names(instance, sample)}
        for v in sample.tolist():
            x = oracle.query(v)
            if not masks[v] >> x & 1:
                step["violation"] = instance.graph.vertices[v]
                return _finish(oracle, REJECT, [step])
        repaired = DerivedOracle(oracle, transform=lambda v, x: x if masks[v] >> x & 1 else fallback[v])
        sub = inner(instance, repaired, config.with_epsilon(config.epsilon / 2), rng)
        return _finish(oracle, sub.decision, [step] + sub.transcript)
    run.__name__ = f"list_wrapper({getattr(inner, '__name__', 'tester')})"
    return run


def component_wrapper(inner: Tester) -> Tester:
    """Run ``inner`` on the components of a scalar sample of vertices.

    Each distinct sampled component is tested once; a repeated draw of the
    same component adds nothing to a one-sided tester that already accepted it.
    """
    def run(instance: Instance, oracle: Oracle, config: TesterConfig,
            rng: np.random.Generator | None = None) -> Verdict:
        rng = _rng(config, rng)
        comps = _cached(instance, "components", lambda: connected_components(instance.graph))
        comp_of = _cached(instance, "component-of", lambda: _component_index(comps, instance.n))
        sample = _sampler(instance).sample(rng, config.scalar_samples)
        order = list(dict.fromkeys(comp_of[v] for v in sample.tolist()))
        transcript = [{"step": "components", "sampled": _names(instance, sample),
                       "components": [_names(instance, comps[c][:1])[0] for c in order]}]
        for c in order:
            sub = _cached(instance, ("restrict", c), lambda c=c: restrict(instance, comps[c]))
            local = DerivedOracle(oracle, index_map=comps[c])
            verdict = inner(sub, local, config, rng)
            transcript += verdict.transcript
            if not verdict.accepted:
                return _finish(oracle, REJECT, transcript)
        return _finish(oracle, ACCEPT, transcript)
    run.__name__ = f"component_wrapper({getattr(inner, '__name__', 'tester')})"
    return run


def _component_index(comps: list[list[int]], n: int) -> list[int]:
    out = [0] * n
    for c, comp in enumerate(comps):
        for v in comp:
            out[v] = c
    return out


def _k2_orientations(instance: Instance, color: Sequence[int]) -> list[int]:
    """Orientations o (vertex v -> o xor color(v)) that respect every list."""
    masks = instance.list_masks
    return [o for o in (0, 1)
            if all(masks[v] >> (o ^ color[v]) & 1 for v in range(instance.n))]


def test_k2(instance: Instance, oracle: Oracle, config: TesterConfig,
            rng: np.random.Generator | None = None) -> Verdict:
    """H = K2 on a connected G: sample both colour classes and compare with a 2-colouring.

    Accepts iff f agrees on every sample with one of the two proper
    colourings that respects the lists.  With both colourings admissible this
    is exactly "constant on each side, with different constants".
    """
    H = instance.target
    if H.n != 2 or H.loops or not H.has_edge(0, 1):
        raise ValueError("test_k2 needs H = K2")
    if len(_cached(instance, "components", lambda: connected_components(instance.graph))) > 1:
        raise ValueError("test_k2 needs a connected input graph")
    rng = _rng(config, rng)
    color = _cached(instance, "two-coloring", lambda: two_coloring(instance.graph))
    if color is None:
        return _finish(oracle, REJECT, [{"step": "bipartite-check", "result": "not bipartite"}])
    valid = _cached(instance, "k2-orientations", lambda: _k2_orientations(instance, color))
    if not valid:
        return _finish(oracle, REJECT, [{"step": "bipartite-check", "result": "lists admit no 2-colouring"}])
    s = config.scalar_samples
    w = instance.weights
    sampled: list[int] = []
    for side in (0, 1):
        part = [v for v in range(instance.n) if color[v] == side]
        if not part or w[part].sum() <= 0:
            continue
        sampler = _cached(instance, ("side", side), lambda part=part: WeightedSampler(w, part))
        sampled += sampler.sample(rng, s).tolist()
    values = {v: oracle.query(v) for v in sampled}
    agree = [o for o in valid if all(x == o ^ color[v] for v, x in values.items())]
    step = {"step": "k2-check", "epsilon": config.epsilon, "sampled": _names(instance, sampled),
            "orientations": len(valid)}
    if not agree:
        step["violation"] = "samples match no admissible 2-colouring"
        return _finish(oracle, REJECT, [step])
    return _finish(oracle, ACCEPT, [step])


def test_via_full_hom(hom: Sequence[int], target: Graph, inner: Tester) -> Tester:
    """Test through a full homomorphism ``hom`` (indices of H to indices of ``target``)."""
    hom = tuple(int(x) for x in hom)

    def run(instance: Instance, oracle: Oracle, config: TesterConfig,
            rng: np.random.Generator | None = None) -> Verdict:
        def image():
            lists = [{hom[x] for x in lst} for lst in instance.lists]
            return Instance.create(instance.graph, target, lists, instance.weights)
        mapped = _cached(instance, ("full-hom", hom, target), image)
        derived = DerivedOracle(oracle, transform=lambda v, x: hom[x])
        verdict = inner(mapped, derived, config, rng)
        return _finish(oracle, verdict.decision, verdict.transcript)
    run.__name__ = f"test_via_full_hom({getattr(inner, '__name__', 'tester')})"
    return run


def propagate_for_testing(instance: Instance, size_cap: int = DEFAULT_SIZE_CAP,
                          pair_only: bool = False) -> ConsistencyFamily | None:
    """(2,3)-Minimality, or arc consistency with implicit pairs when ``pair_only``."""
    key = ("family", size_cap, pair_only)
    l = 2 if pair_only else 3
    return _cached(instance, key, lambda: run_minimality(instance, 2, l, size_cap=size_cap))


def test_biarc(instance: Instance, oracle: Oracle, config: TesterConfig,
               rng: np.random.Generator | None = None,
               family: ConsistencyFamily | None = None) -> Verdict:
    """Violating-vertex check on a scalar sample, then violating-pair check on Y1 x Y2."""
    rng = _rng(config, rng)
    if family is None:
        family = propagate_for_testing(instance)
        if family is None:
            return _finish(oracle, REJECT, [{"step": "propagation", "result": "unsatisfiable"}])
    sampler = _sampler(instance)
    X = sampler.sample(rng, config.scalar_samples).tolist()
    step = {"step": "vertex-check", "epsilon": config.epsilon, "sampled": _names(instance, X)}
    for v in X:
        if not family.allows_vertex(v, oracle.query(v)):
            step["violation"] = instance.graph.vertices[v]
            return _finish(oracle, REJECT, [step])
    q = config.pair_samples(instance.n)
    Y1 = sampler.sample(rng, q).tolist()
    Y2 = sampler.sample(rng, q).tolist()
    f1 = [oracle.query(v) for v in Y1]
    f2 = [oracle.query(u) for u in Y2]
    ok = family.pair_matrix(Y1, f1, Y2, f2)
    pair_step = {"step": "pair-check", "Y1": _names(instance, Y1), "Y2": _names(instance, Y2)}
    if not ok.all():
        i, j = np.argwhere(~ok)[0]
        pair_step["violation"] = _names(instance, (Y1[i], Y2[j]))
        return _finish(oracle, REJECT, [step, pair_step])
    return _finish(oracle, ACCEPT, [step, pair_step])


# ---- dispatch ---------------------------------------------------------------

TESTER_IDS = ("auto", "reflexive-complete", "k2", "bipartite", "biarc")


def _bipartite_satisfiable(instance: Instance, sides: Sequence[int]) -> bool:
    """Exact check for complete bipartite H: each component needs an admissible orientation."""
    color = two_coloring(instance.graph)
    if color is None:
        return False
    side_mask = [0, 0]
    for x, s in enumerate(sides):
        side_mask[s] |= 1 << x
    masks = instance.list_masks
    for comp in connected_components(instance.graph):
        if not any(all(masks[v] & side_mask[o ^ color[v]] for v in comp) for o in (0, 1)):
            return False
    return True


def is_satisfiable_precheck(instance: Instance) -> bool:
    """Zero-query satisfiability check used before any tester runs."""
    def decide():
        H = instance.target
        verdict = classify(H)
        if verdict.detail is Detail.REFLEXIVE_COMPLETE:
            return True
        if verdict.detail is Detail.COMPLETE_BIPARTITE:
            return _bipartite_satisfiable(instance, verdict.sides)
        if instance.n <= SOLVER_PRECHECK_MAX_N:
            return is_satisfiable(instance)
        return propagate_for_testing(instance) is not None
    return _cached(instance, "satisfiable", decide)


def build_tester(name: str, H: Graph) -> Tester:
    """Tester ``name`` for target H; raises if it does not apply to H."""
    verdict = classify(H)
    if name == "auto":
        if verdict.detail is Detail.NOT_BIARC:
            raise NoSublinearTester("H is not bi-arc: no sublinear tester exists")
        name = {Detail.REFLEXIVE_COMPLETE: "reflexive-complete",
                Detail.COMPLETE_BIPARTITE: "bipartite",
                Detail.BIARC_OTHER: "biarc"}[verdict.detail]
    if name == "reflexive-complete":
        if verdict.detail is not Detail.REFLEXIVE_COMPLETE:
            raise ValueError("reflexive-complete tester needs a reflexive complete H")
        return test_reflexive_complete
    if name in ("k2", "bipartite"):
        sides = complete_bipartite_sides(H)
        if sides is None or (name == "k2" and H.n != 2):
            raise ValueError(f"{name} tester needs an irreflexive complete bipartite H"
                             + (" on two vertices" if name == "k2" else ""))
        inner = test_k2 if name == "k2" and sides == (0, 1) else test_via_full_hom(sides, K2, test_k2)
        return list_wrapper(component_wrapper(inner))
    if name == "biarc":
        if verdict.detail is Detail.NOT_BIARC or (
                verdict.majority is None and find_conservative_majority(H) is None):
            raise NoSublinearTester("H is not bi-arc: no sublinear tester exists")
        return test_biarc
    raise ValueError(f"unknown tester {name!r}; choose from {', '.join(TESTER_IDS)}")


def test(instance: Instance, oracle: Oracle, config: TesterConfig, tester: str = "auto",
         rng: np.random.Generator | None = None) -> Verdict:
    """Dispatch on the class of H, after a zero-query satisfiability check.

    With ``config.trials > 1`` the tester is repeated and the input rejected
    if any repetition rejects.
    """
    run = build_tester(tester, instance.target)
    if not is_satisfiable_precheck(instance):
        return _finish(oracle, REJECT, [{"step": "precheck", "result": "unsatisfiable"}])
    rng = _rng(config, rng)
    transcript: list[dict] = []
    for trial in range(config.trials):
        verdict = run(instance, oracle, config, rng)
        transcript += [dict(entry, trial=trial) for entry in verdict.transcript]
        if not verdict.accepted:
            return _finish(oracle, REJECT, transcript)
    return _finish(oracle, ACCEPT, transcript)


def query_budget(tester: str, instance: Instance, config: TesterConfig) -> int:
    """Distinct-query upper bound for one call of :func:`test` with ``tester``.

    Wrapped K2 path: ceil(c/eps) list-check samples plus, for each distinct
    sampled component (at most K of them), 2 * ceil(c/(eps/2)) K2 samples.
    With K = 1 (connected G) this is ceil(c/eps) + 2 * ceil(2c/eps).
    """
    if tester == "auto":
        tester = {Detail.REFLEXIVE_COMPLETE: "reflexive-complete",
                  Detail.COMPLETE_BIPARTITE: "bipartite",
                  Detail.BIARC_OTHER: "biarc"}[classify(instance.target).detail]
    s = config.scalar_samples
    if tester == "reflexive-complete":
        per_trial = s
    elif tester in ("k2", "bipartite"):
        half = config.with_epsilon(config.epsilon / 2)
        comps = connected_components(instance.graph)
        positive = sum(1 for comp in comps if instance.weights[comp].sum() > 0)
        per_trial = s + min(positive, half.scalar_samples) * 2 * half.scalar_samples
    elif tester == "biarc":
        per_trial = s + 2 * config.pair_samples(instance.n)
    else:
        raise ValueError(f"unknown tester {tester!r}")
    return min(instance.n, per_trial * config.trials)


# keep pytest from collecting the testers when test modules import them
for _fn in (test, test_reflexive_complete, test_k2, test_biarc, TesterConfig):
    _fn.__test__ = False
