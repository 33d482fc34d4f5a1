import pytest

from tcqlite import dllite, rsat
from tcqlite.model import (
    Atomic, CQ, ConceptAssertion, ConceptAtom, Exists, Ind, KB, Ontology,
    Role, RoleAssertion, RoleAtom, RoleInclusion, Signature, TKB, Var, abox,
    ci, cq_canonical_key, normalize_tcq, propositional_abstraction,
)

from conftest import playground_query, playground_tkb


def onto(cis=(), ris=()):
    return Ontology(frozenset(cis), frozenset(ris))


def sig(concepts=(), roles=(), inds=(), rigid_c=(), rigid_r=()):
    return Signature(frozenset(concepts), frozenset(roles), frozenset(inds),
                     frozenset(rigid_c), frozenset(rigid_r))


class TestInstantiate:
    def test_role_pair(self):
        q = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y"))}))
        a = rsat.instantiate([q])
        assert a == abox(RoleAssertion(Role("R"), rsat.aux_name("x"),
                                       rsat.aux_name("y")))

    def test_ground_unchanged(self):
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))}))
        assert rsat.instantiate([q]) == abox(ConceptAssertion(Atomic("A"), "a"))

    def test_two_cqs(self):
        q1 = CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}))
        q2 = CQ(frozenset({ConceptAtom(Atomic("B"), Var("y"))}))
        assert rsat.instantiate([q1, q2]) == abox(
            ConceptAssertion(Atomic("A"), rsat.aux_name("x")),
            ConceptAssertion(Atomic("B"), rsat.aux_name("y")))


class TestRigidConsequences:
    def test_role_hierarchy_consequences(self):
        o = onto(ris=[RoleInclusion(Role("S"), Role("R"))])
        s = sig(roles=("S", "R"), rigid_r=("R",))
        q = CQ(frozenset({RoleAtom(Role("S"), Var("x"), Var("y"))}))
        out = rsat.rigid_consequences(o, [q], s)
        ax, ay = rsat.aux_name("x"), rsat.aux_name("y")
        assert RoleAssertion(Role("R"), ax, ay) in out
        assert ConceptAssertion(Exists(Role("R")), ax) in out
        assert ConceptAssertion(Exists(Role("R", True)), ay) in out

    def test_rigid_ground_atom(self):
        s = sig(concepts=("A",), rigid_c=("A",))
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))}))
        assert rsat.rigid_consequences(onto(), [q], s) == frozenset(
            {ConceptAssertion(Atomic("A"), "a")})

    def test_no_rigid_names(self):
        o = onto([ci([Atomic("A")], Atomic("B"))])
        s = sig(concepts=("A", "B"))
        q = CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}))
        assert rsat.rigid_consequences(o, [q], s) == frozenset()


class TestWitnessQueries:
    def test_rigid_role_witness(self):
        o = onto([ci([Exists(Role("R", True))], Atomic("A"))])
        s = sig(concepts=("A",), roles=("R",), rigid_r=("R",))
        phi = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y")),
                            ConceptAtom(Atomic("A"), Var("y"))}))
        out = rsat.witness_queries(o, phi, s)
        plain = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y"))}))
        assert any(cq_canonical_key(w) == cq_canonical_key(plain) for w in out)

    def test_fully_rigid_self_witness(self):
        o = onto([ci([Atomic("A")], Atomic("A"))])
        s = sig(concepts=("A",), rigid_c=("A",))
        phi = CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}))
        out = rsat.witness_queries(o, phi, s)
        assert any(cq_canonical_key(w) == cq_canonical_key(phi) for w in out)

    def test_empty_rigid_signature(self):
        o = onto([ci([Atomic("A")], Atomic("B"))])
        s = sig(concepts=("A", "B"))
        phi = CQ(frozenset({ConceptAtom(Atomic("B"), Var("x"))}))
        assert rsat.witness_queries(o, phi, s) == ()

    def test_every_witness_entails_target(self):
        o = onto([ci([Exists(Role("R", True))], Atomic("A"))],
                 [RoleInclusion(Role("S"), Role("R"))])
        s = sig(concepts=("A",), roles=("R", "S"), rigid_c=("A",),
                rigid_r=("R",))
        phi = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y")),
                            ConceptAtom(Atomic("A"), Var("y"))}))
        out = rsat.witness_queries(o, phi, s)
        assert out
        bound = len(phi.terms())
        for psi in out:
            assert len(psi.terms()) <= bound
            assert dllite.cq_entailed(KB(o, rsat.instantiate([psi])), phi)


class TestBuildArf:
    def test_one_step_unfolding(self):
        o = onto([ci([Exists(Role("S", True))], Atomic("A"))],
                 [RoleInclusion(Role("S"), Role("R"))])
        s = sig(concepts=("A",), roles=("S", "R"), rigid_c=("A",),
                rigid_r=("R",))
        cqs = [CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}))]
        rf = [ConceptAssertion(Exists(Role("S")), "b")]
        out = rsat.build_arf(o, rf, cqs, s)
        child = rsat.tree_name("b", (Role("S"),))
        assert RoleAssertion(Role("R"), "b", child) in out
        assert ConceptAssertion(Atomic("A"), child) in out

    def test_empty_rf(self):
        assert rsat.build_arf(onto(), [], [], sig()) == frozenset()

    def test_no_rigid_consequences(self):
        o = onto()
        s = sig(roles=("S", "R"))  # nothing rigid
        cqs = [CQ(frozenset({ConceptAtom(Atomic("A"), Var("x"))}))]
        rf = [ConceptAssertion(Exists(Role("S")), "b")]
        assert rsat.build_arf(o, rf, cqs, s) == frozenset()

    def test_only_rigid_assertions(self, fixture_rigid):
        tkb, phi = fixture_rigid
        from tcqlite.model import is_rigid_assertion
        cqs = propositional_abstraction(normalize_tcq(phi))[1]
        rf = [ConceptAssertion(Exists(Role("S")), "a")]
        out = rsat.build_arf(tkb.ontology, rf, cqs, tkb.signature)
        assert out
        for a in out:
            assert is_rigid_assertion(a, tkb.signature)


class TestKr:
    def test_assembly(self, fixture_rigid):
        tkb, phi = fixture_rigid
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        tup = rsat.RCompleteTuple(frozenset(), frozenset({1}), frozenset(),
                                  frozenset())
        kb = rsat.kr(1, tup, frozenset({1}), tkb, cqs)
        assert ConceptAssertion(Atomic("B"), "a") in kb.abox      # from A_1
        assert ConceptAssertion(Atomic("A"), "a") in kb.abox      # from A_QW
        # rigid consequences of A(a): R and T successors
        assert ConceptAssertion(Exists(Role("R")), "a") in kb.abox

    def test_beyond_n_drops_abox(self, fixture_rigid):
        tkb, phi = fixture_rigid
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        tup = rsat.RCompleteTuple(frozenset(), frozenset(), frozenset(),
                                  frozenset())
        kb = rsat.kr(5, tup, frozenset(), tkb, cqs)
        assert ConceptAssertion(Atomic("B"), "a") not in kb.abox

    def test_out_of_range(self, fixture_rigid):
        tkb, phi = fixture_rigid
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        tup = rsat.RCompleteTuple(frozenset(), frozenset(), frozenset(),
                                  frozenset())
        with pytest.raises(rsat.IndexOutOfRange):
            rsat.kr(7, tup, frozenset(), tkb, cqs, horizon=5)


class TestRSatisfiable:
    def _setup(self, fixture):
        tkb, phi = fixture
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        return tkb, cqs

    def test_rf_forced_by_entailment(self, fixture_rigid):
        tkb, cqs = self._setup(fixture_rigid)
        # W demands the first leaf (A(a)); A ⊑ ∃S forces ∃S(a) into R_F
        tup = rsat.RCompleteTuple(
            rsat.complete_with_negatives(tkb.signature, frozenset(),
                                         tuple(sorted(tkb.individuals()))),
            frozenset({1}), frozenset({1, 2}), frozenset())
        ok = rsat.rsatisfiable(cqs, tkb.ontology, tkb.signature,
                               tkb.abox_at(0), tup, frozenset({1}),
                               tkb.individuals())
        assert not ok  # ∃S(a) entailed but absent from R_F

    def test_c3_violation(self, fixture_rigid):
        tkb, cqs = self._setup(fixture_rigid)
        tup = rsat.RCompleteTuple(frozenset(), frozenset(), frozenset({1, 2}),
                                  frozenset())
        assert not rsat.rsatisfiable(cqs, tkb.ontology, tkb.signature,
                                     tkb.abox_at(0), tup, frozenset({1}),
                                     tkb.individuals())

    def test_vacuous_empty_query(self):
        tkb = TKB(onto(), (abox(ConceptAssertion(Atomic("A"), "a")),),
                  sig(concepts=("A",), inds=("a",)))
        from tcqlite.model import validate_tkb
        tkb = validate_tkb(tkb)
        tup = rsat.RCompleteTuple(frozenset(), frozenset(), frozenset(),
                                  frozenset())
        assert rsat.rsatisfiable((), tkb.ontology, tkb.signature,
                                 tkb.abox_at(0), tup, frozenset(),
                                 tkb.individuals())


class TestIsRComplete:
    def test_simple_accepting_tuple(self):
        from tcqlite.model import validate_tkb
        tkb = validate_tkb(TKB(onto(),
                               (abox(ConceptAssertion(Atomic("A"), "a")),),
                               sig(concepts=("A",), inds=("a",))))
        cqs = (CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))})),)
        tup = rsat.RCompleteTuple(frozenset(), frozenset({1}), frozenset(),
                                  frozenset())
        w_list = (frozenset({1}),)
        assert rsat.is_r_complete(tup, w_list, (0,), tkb, cqs)

    def test_playground_has_no_tuple_with_contradicting_worlds(
            self, fixture_rigid):
        """Demanding the first leaf early and refusing the second later is
        impossible when the roles are rigid."""
        tkb, phi = fixture_rigid
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        w_list = (frozenset({1}), frozenset())
        iota = (0, 1)
        inds = tuple(sorted(tkb.individuals()))
        found = False
        for a_r in rsat.enumerate_rigid_types(tkb.ontology, tkb.signature,
                                              inds):
            for r_f_bits in range(4):
                r_f = frozenset(
                    a for k, a in enumerate(
                        [ConceptAssertion(Exists(Role("S")), "a"),
                         ConceptAssertion(Exists(Role("S")),
                                          rsat.aux_name("x0_0"))])
                    if r_f_bits >> k & 1)
                tup = rsat.RCompleteTuple(a_r, frozenset({1}),
                                          frozenset({1, 2}), r_f)
                if rsat.is_r_complete(tup, w_list, iota, tkb, cqs):
                    found = True
        assert not found

    def test_missing_entailed_rigid_fails_c1_or_c6(self, fixture_rigid):
        tkb, phi = fixture_rigid
        cqs = tuple(propositional_abstraction(normalize_tcq(phi))[1])
        inds = tuple(sorted(tkb.individuals()))
        # all-negative rigid type contradicts the rigid consequences of Q_R
        a_r = rsat.complete_with_negatives(tkb.signature, frozenset(), inds)
        tup = rsat.RCompleteTuple(a_r, frozenset({1}), frozenset({2}),
                                  frozenset())
        assert not rsat.is_r_complete(tup, (frozenset({1}),), (0, 0), tkb, cqs)


class TestEnumerations:
    def test_polarity_bijection(self):
        s = sig(concepts=("A",), roles=("R",), inds=("a",),
                rigid_c=("A",), rigid_r=("R",))
        cands = rsat.rigid_candidates(s, ("a",))
        for t in rsat.all_rigid_types(s, ("a",)):
            for c in cands:
                assert (c in t) != (c.negated() in t)

    def test_closed_types_contain_base(self):
        o = onto([ci([Atomic("A")], Exists(Role("R")))])
        s = sig(concepts=("A",), roles=("R",), rigid_c=("A",), rigid_r=("R",))
        base = frozenset({ConceptAssertion(Atomic("A"), "a")})
        for t in rsat.enumerate_rigid_types(o, s, ("a",), base):
            assert base <= t
            # closure: A(a) forces ∃R(a)
            assert ConceptAssertion(Exists(Role("R")), "a") in t
