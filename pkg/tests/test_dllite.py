import pytest
from hypothesis import given, settings, strategies as st

from tcqlite import dllite, oracle
from tcqlite.model import (
    Atomic, CQ, ConceptAssertion, ConceptAtom, Exists, Ind, KB, Ontology,
    Role, RoleAssertion, RoleAtom, RoleInclusion, Var, abox, ci,
)

from conftest import random_atemporal, random_cq, seeded


def onto(cis=(), ris=()):
    return Ontology(frozenset(cis), frozenset(ris))


class TestRoleEntails:
    def test_declared(self):
        o = onto(ris=[RoleInclusion(Role("S"), Role("R"))])
        assert dllite.role_entails(o, Role("S"), Role("R"))

    def test_inversion_closure(self):
        o = onto(ris=[RoleInclusion(Role("S"), Role("R"))])
        assert dllite.role_entails(o, Role("S", True), Role("R", True))

    def test_transitive_two_steps(self):
        o = onto(ris=[RoleInclusion(Role("S"), Role("R")),
                      RoleInclusion(Role("R"), Role("T"))])
        # brute path search over declared inclusions confirms the chain
        declared = {("S", "R"), ("R", "T")}
        reach = {"S"}
        for _ in range(3):
            reach |= {sup for sub, sup in declared if sub in reach}
        assert "T" in reach
        assert dllite.role_entails(o, Role("S"), Role("T"))

    def test_reflexive(self):
        assert dllite.role_entails(onto(), Role("R"), Role("R"))


class TestConceptEntails:
    def test_exists_via_ci_and_ri(self):
        o = onto([ci([Atomic("A")], Exists(Role("S")))],
                 [RoleInclusion(Role("S"), Role("R"))])
        assert dllite.concept_entails(o, {Atomic("A")}, Exists(Role("R")))

    def test_reflexivity(self):
        assert dllite.concept_entails(onto(), {Atomic("A")}, Atomic("A"))

    def test_bottom_direct(self):
        o = onto([ci([Atomic("A"), Atomic("B")], None)])
        assert dllite.concept_entails(o, {Atomic("A"), Atomic("B")}, None)

    def test_bottom_via_successor(self):
        o = onto([ci([Exists(Role("R", True))], Atomic("A")),
                  ci([Atomic("A")], None)])
        assert dllite.concept_entails(o, {Exists(Role("R"))}, None)


class TestCanonicalModel:
    def test_chain_one_step(self):
        kb = KB(onto([ci([Atomic("A")], Exists(Role("R")))]),
                abox(ConceptAssertion(Atomic("A"), "a")))
        m = dllite.canonical_model(kb, depth=2)
        assert m.has_concept("a", Atomic("A"))
        assert m.has_concept("a", Exists(Role("R")))
        child = ("a", (Role("R"),))
        assert child in m.unnamed
        assert m.has_concept(child, Exists(Role("R", True)))
        assert m.has_role("a", child, "R")

    def test_plain_edge_no_unnamed(self):
        kb = KB(onto(), abox(RoleAssertion(Role("R"), "a", "b")))
        m = dllite.canonical_model(kb, depth=2)
        assert m.has_role("a", "b", "R")
        assert m.has_concept("a", Exists(Role("R")))
        assert m.has_concept("b", Exists(Role("R", True)))
        # children exist for the derived existentials but carry no new info
        assert all(p[0] in ("a", "b") for p in m.unnamed)

    def test_infinite_chain_truncated(self):
        kb = KB(onto([ci([Exists(Role("R", True))], Exists(Role("R")))]),
                abox(ConceptAssertion(Exists(Role("R")), "a")))
        m = dllite.canonical_model(kb, depth=3)
        deep = ("a", (Role("R"),) * 3)
        assert deep in m.unnamed
        assert ("a", (Role("R"),) * 4) not in m.unnamed

    def test_depth_prefix_property(self):
        kb = KB(onto([ci([Exists(Role("R", True))], Exists(Role("R")))]),
                abox(ConceptAssertion(Exists(Role("R")), "a")))
        m2 = dllite.canonical_model(kb, depth=2)
        m3 = dllite.canonical_model(kb, depth=3)
        assert set(m2.unnamed) <= set(m3.unnamed)
        for p in m2.unnamed:
            assert m2.unnamed[p] == m3.unnamed[p]


class TestConsistency:
    def test_bottom_fires(self):
        kb = KB(onto([ci([Atomic("A"), Atomic("B")], None)]),
                abox(ConceptAssertion(Atomic("A"), "a"),
                     ConceptAssertion(Atomic("B"), "a")))
        assert not dllite.is_consistent(kb)

    def test_negative_vs_derived(self):
        kb = KB(onto([ci([Atomic("A")], Exists(Role("R")))]),
                abox(ConceptAssertion(Atomic("A"), "a"),
                     ConceptAssertion(Exists(Role("R")), "a", positive=False)))
        assert not dllite.is_consistent(kb)

    def test_una_distinct_individuals(self):
        kb = KB(onto(), abox(ConceptAssertion(Atomic("A"), "a"),
                             ConceptAssertion(Atomic("A"), "b",
                                              positive=False)))
        assert dllite.is_consistent(kb)


class TestCqEntailment:
    def test_hom_into_unnamed(self):
        kb = KB(onto([ci([Atomic("A")], Exists(Role("R")))]),
                abox(ConceptAssertion(Atomic("A"), "a")))
        q = CQ(frozenset({RoleAtom(Role("R"), Ind("a"), Var("x"))}))
        assert dllite.cq_entailed(kb, q)

    def test_no_two_cycle_in_tree(self):
        kb = KB(onto([ci([Atomic("A")], Exists(Role("R")))]),
                abox(ConceptAssertion(Atomic("A"), "a")))
        q = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y")),
                          RoleAtom(Role("R"), Var("y"), Var("x"))}))
        assert not dllite.cq_entailed(kb, q)

    def test_ground_edge(self):
        kb = KB(onto(), abox(RoleAssertion(Role("R"), "a", "b")))
        q = CQ(frozenset({RoleAtom(Role("R"), Ind("a"), Var("x"))}))
        assert dllite.cq_entailed(kb, q)


class TestCertainAnswers:
    def test_direct_lookup(self):
        kb = KB(onto(), abox(ConceptAssertion(Atomic("A"), "a"),
                             ConceptAssertion(Atomic("A"), "b")))
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}), ("x",))
        assert dllite.certain_answers(kb, q) == {(("x", "a"),), (("x", "b"),)}

    def test_one_ci_step(self):
        kb = KB(onto([ci([Atomic("B")], Atomic("A"))]),
                abox(ConceptAssertion(Atomic("B"), "a")))
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}), ("x",))
        assert dllite.certain_answers(kb, q) == {(("x", "a"),)}

    def test_boolean_degenerate(self):
        kb = KB(onto(), abox(ConceptAssertion(Atomic("A"), "a")))
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))}))
        assert dllite.certain_answers(kb, q) == {()}


class TestPerfectRef:
    def test_single_ci_step(self):
        o = onto([ci([Atomic("B")], Atomic("A"))])
        ref = dllite.perfect_ref(CQ(frozenset({ConceptAtom(Atomic("A"),
                                                           Var("x"))}),
                                    ("x",)), o)
        shapes = {frozenset(map(str, c.atoms)) for c in ref}
        assert frozenset({"ConceptAtom(concept=Atomic(name='A'), term=Var(name='x'))"}) in shapes
        assert frozenset({"ConceptAtom(concept=Atomic(name='B'), term=Var(name='x'))"}) in shapes

    def test_atom_reduction(self):
        o = onto([ci([Atomic("A")], Exists(Role("R")))])
        q = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y"))}), ("x",))
        ref = dllite.perfect_ref(q, o)
        # one disjunct must be the plain A(x) reduction
        assert any(c.atoms == frozenset({ConceptAtom(Atomic("A"), Var("x"))})
                   for c in ref)

    def test_no_applicable_ci(self):
        ref = dllite.perfect_ref(CQ(frozenset({ConceptAtom(Atomic("A"),
                                                           Var("x"))}),
                                    ("x",)), onto())
        assert len(ref) == 1


class TestOracleEquivalences:
    """The dual-route laws: chase vs rewriting vs brute force."""

    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 100_000))
    def test_triangle_small(self, seed):
        rng = seeded(seed)
        o, a, concepts, roles, inds = random_atemporal(rng)
        kb = KB(o, a)
        q = random_cq(rng, concepts, roles, inds)
        chase = dllite.cq_entailed(kb, q)
        brute = oracle.brute_cq_entailed(kb, q)
        assert chase == brute
        if dllite.is_consistent(kb) and q.is_boolean():
            ref = dllite.perfect_ref(q, o)
            assert chase == dllite.eval_ucq_db(a, ref)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000))
    def test_qunsat_matches_consistency(self, seed):
        rng = seeded(seed)
        o, a, concepts, roles, inds = random_atemporal(rng)
        qu = dllite.q_unsat(o, concepts, roles)
        assert (not dllite.is_consistent(KB(o, a))) == qu.eval_db(a)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_abox_monotonicity(self, seed):
        rng = seeded(seed)
        o, a, concepts, roles, inds = random_atemporal(rng)
        kb = KB(o, a)
        q = random_cq(rng, concepts, roles, inds)
        if not dllite.is_consistent(kb) or not dllite.cq_entailed(kb, q):
            return
        bigger = KB(o, frozenset(set(a) | {ConceptAssertion(Atomic(concepts[0]),
                                                            inds[0])}))
        if dllite.is_consistent(bigger):
            assert dllite.cq_entailed(bigger, q)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_unnamed_element_law(self, seed):
        rng = seeded(seed)
        o, a, concepts, roles, inds = random_atemporal(rng)
        kb = KB(o, a)
        if not dllite.is_consistent(kb):
            return
        m = dllite.canonical_model(kb, depth=2)
        for path, types in m.unnamed.items():
            last = path[1][-1]
            for b in types:
                assert dllite.concept_entails(o, {Exists(last.inverse())}, b)
            # and conversely every entailed basic concept is present
            for b in [Atomic(c) for c in concepts]:
                if dllite.concept_entails(o, {Exists(last.inverse())}, b):
                    assert b in types
