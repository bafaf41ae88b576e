import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homtest.errors import OracleBudgetExceeded, SchemaError, Unsatisfiable
from homtest.solver import (count_list_homs, distance_to_property, enumerate_list_homs,
                            find_list_hom, is_extendable, relation_between)
from homtest.structures import Graph, Instance

from oracles import brute_distance, brute_homs, random_instance

K2 = Graph.build("ab", [("a", "b")])
REFL_P3 = Graph.build("abc", [("a", "a"), ("b", "b"), ("c", "c"), ("a", "b"), ("b", "c")])
IRR_P4 = Graph.build("abcd", [("a", "b"), ("b", "c"), ("c", "d")])
LOOPED_EDGE = Graph.build("ab", [("a", "b"), ("b", "b")])
EDGE = Graph.build("uv", [("u", "v")])
TRIANGLE = Graph.build("xyz", [("x", "y"), ("y", "z"), ("x", "z")])
C4 = Graph.build("pqrs", [("p", "q"), ("q", "r"), ("r", "s"), ("s", "p")])


def names(H, pairs):
    return {(H.vertices[x], H.vertices[y]) for x, y in pairs}


def gadget(H, list_u, list_v):
    idx = H.index
    return Instance.create(EDGE, H, [[idx[x] for x in list_u], [idx[x] for x in list_v]])


class TestEnumeration:
    def test_single_edge(self):
        assert enumerate_list_homs(Instance.create(EDGE, K2)) == [(0, 1), (1, 0)]

    def test_triangle_into_k2_is_empty(self):
        inst = Instance.create(TRIANGLE, K2)
        assert len(brute_homs(inst)) == 0  # 8 maps checked exhaustively
        assert enumerate_list_homs(inst) == []

    def test_edgeless_gives_product(self):
        G = Graph.build("xyz", [])
        H = Graph.build("abc", [])
        inst = Instance.create(G, H, [[0], [0, 1], [0, 1, 2]])
        assert len(enumerate_list_homs(inst)) == 6 == count_list_homs(inst)

    def test_limit(self):
        assert enumerate_list_homs(Instance.create(EDGE, K2), limit=1) == [(0, 1)]

    def test_loop_in_g_needs_looped_value(self):
        G = Graph.build("u", [("u", "u")])
        assert enumerate_list_homs(Instance.create(G, LOOPED_EDGE)) == [(1,)]

    def test_budget(self):
        G = Graph.build([f"v{i}" for i in range(12)], [])
        inst = Instance.create(G, Graph.build("abc", []))
        with pytest.raises(OracleBudgetExceeded):
            enumerate_list_homs(inst, budget=100)

    @given(st.integers(0, 100_000))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        H = [K2, REFL_P3, IRR_P4, LOOPED_EDGE][seed % 4]
        inst = random_instance(rng, H, int(rng.integers(1, 7)), loops=True)
        got = enumerate_list_homs(inst)
        assert got == sorted(brute_homs(inst))
        assert all(inst.is_list_hom(f) for f in got)
        assert count_list_homs(inst) == len(got)
        assert (find_list_hom(inst) is None) == (not got)


class TestDistance:
    def test_hom_is_at_distance_zero(self):
        inst = Instance.create(C4, K2)
        assert distance_to_property(inst, (0, 1, 0, 1)) == (0.0, (0, 1, 0, 1))

    def test_forced_repair(self):
        inst = Instance.create(Graph.build("u", []), K2, [[0]])
        assert distance_to_property(inst, (1,)) == (1.0, (0,))

    def test_constant_on_c4(self):
        inst = Instance.create(C4, K2)
        # both 2-colourings disagree with f = a on two of four vertices
        assert brute_distance(inst, (0, 0, 0, 0)) == 0.5
        assert distance_to_property(inst, (0, 0, 0, 0)) == (0.5, (0, 1, 0, 1))

    def test_unsatisfiable(self):
        with pytest.raises(Unsatisfiable):
            distance_to_property(Instance.create(TRIANGLE, K2), (0, 1, 0))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            distance_to_property(Instance.create(EDGE, K2), (0,))

    @given(st.integers(0, 100_000), st.booleans())
    def test_matches_brute_force(self, seed, decompose):
        rng = np.random.default_rng(seed)
        H = [K2, REFL_P3, IRR_P4, LOOPED_EDGE][seed % 4]
        inst = random_instance(rng, H, int(rng.integers(1, 8)), edge_p=0.3)
        f = tuple(int(x) for x in rng.integers(H.n, size=inst.n))
        expected = brute_distance(inst, f)
        if expected is None:
            with pytest.raises(Unsatisfiable):
                distance_to_property(inst, f, decompose=decompose)
            return
        dist, witness = distance_to_property(inst, f, decompose=decompose)
        assert dist == pytest.approx(expected, abs=1e-9)
        assert inst.is_list_hom(witness)
        # the witness is the first minimizer in enumeration order
        w = inst.weights
        best = [g for g in sorted(brute_homs(inst))
                if abs(sum(w[v] for v in range(inst.n) if g[v] != f[v]) - expected) < 1e-9]
        assert witness == best[0]
        assert (dist == 0) == inst.is_list_hom(f)


class TestRelations:
    def test_reflexive_path_gadget(self):
        rel = relation_between(gadget(REFL_P3, "ab", "bc"), 0, 1)
        assert names(REFL_P3, rel) == {("a", "b"), ("b", "b"), ("b", "c")}

    def test_irreflexive_path_gadget(self):
        rel = relation_between(gadget(IRR_P4, "ac", "bd"), 0, 1)
        assert names(IRR_P4, rel) == {("a", "b"), ("c", "b"), ("c", "d")}

    def test_looped_edge_gadget(self):
        rel = relation_between(gadget(LOOPED_EDGE, "ab", "ab"), 0, 1)
        assert names(LOOPED_EDGE, rel) == {("a", "b"), ("b", "b"), ("b", "a")}

    def test_same_vertex_rejected(self):
        with pytest.raises(SchemaError):
            relation_between(Instance.create(EDGE, K2), 0, 0)

    @given(st.integers(0, 100_000))
    def test_equals_projection(self, seed):
        rng = np.random.default_rng(seed)
        H = [K2, REFL_P3, IRR_P4, LOOPED_EDGE][seed % 4]
        inst = random_instance(rng, H, int(rng.integers(2, 7)), edge_p=0.35)
        u, v = (int(x) for x in rng.choice(inst.n, size=2, replace=False))
        assert relation_between(inst, u, v) == {(f[u], f[v]) for f in brute_homs(inst)}

    def test_extendable(self):
        inst = gadget(REFL_P3, "ab", "bc")
        assert is_extendable(inst, {})
        assert is_extendable(inst, {0: 0, 1: 1})
        assert not is_extendable(inst, {0: 0, 1: 2})
