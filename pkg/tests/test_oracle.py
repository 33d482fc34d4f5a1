import pytest

from tcqlite import oracle
from tcqlite.errors import BoundsTooLarge
from tcqlite.model import (
    And, Atomic, CQ, ConceptAssertion, ConceptAtom, Globally, Ind, KB, Leaf,
    Not, Ontology, Prev, Role, RoleAtom, Signature, TKB, TrueQ, Var, abox,
    ci, validate_tkb,
)

from conftest import playground_query, playground_tkb


def interp(domain, concepts=None, roles=None, ind_map=None):
    return oracle.Interpretation(tuple(domain),
                                 {k: frozenset(v)
                                  for k, v in (concepts or {}).items()},
                                 {k: frozenset(v)
                                  for k, v in (roles or {}).items()},
                                 ind_map or {})


class TestEvalOnLasso:
    def test_globally_constant(self):
        i = interp((0,), {"A": {0}}, {}, {"a": 0})
        lasso = oracle.LassoStructure((), (i,))
        phi = Globally(Leaf(CQ(frozenset({ConceptAtom(Atomic("A"),
                                          Ind("a"))}))))
        assert oracle.eval_tcq_on_lasso(lasso, phi, 0)

    def test_prev_false_at_zero(self):
        i = interp((0,), {"A": {0}}, {}, {"a": 0})
        lasso = oracle.LassoStructure((), (i,))
        phi = Prev(Leaf(CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))}))))
        assert not oracle.eval_tcq_on_lasso(lasso, phi, 0)

    def test_playground_contradiction_on_models(self, fixture_rigid):
        """Any structure making the premise hold at 0 satisfies the negated
        query's body at 1 when the roles are rigid."""
        tkb, phi = fixture_rigid
        # a 2-element structure: a has an S/R/T successor at time 0 only,
        # the rigid R,T edges persist at time 1
        i0 = interp((0, 1), {"A": {0}, "B": set()},
                    {"S": {(0, 1)}, "R": {(0, 1)}, "T": {(0, 1)}}, {"a": 0})
        i1 = interp((0, 1), {"A": set(), "B": {0}},
                    {"S": set(), "R": {(0, 1)}, "T": {(0, 1)}}, {"a": 0})
        lasso = oracle.LassoStructure((i0,), (i1,),
                                      rigid_roles=frozenset({"R", "T"}))
        q2 = CQ(frozenset({ConceptAtom(Atomic("B"), Ind("a")),
                           RoleAtom(Role("R"), Ind("a"), Var("x")),
                           RoleAtom(Role("T"), Ind("a"), Var("x"))}))
        assert oracle.eval_tcq_on_lasso(lasso, Leaf(q2), 1)
        assert not oracle.eval_tcq_on_lasso(lasso, phi, 1)

    def test_until_fixpoint_sweeps_bounded(self):
        i_a = interp((0,), {"A": {0}, "B": set()}, {}, {"a": 0})
        i_b = interp((0,), {"A": set(), "B": {0}}, {}, {"a": 0})
        qa = Leaf(CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))})))
        qb = Leaf(CQ(frozenset({ConceptAtom(Atomic("B"), Ind("a"))})))
        from tcqlite.model import Until
        lasso = oracle.LassoStructure((i_a,), (i_a, i_a, i_b))
        got, sweeps = oracle.eval_tcq_on_lasso(lasso, Until(qa, qb), 0,
                                               return_sweeps=True)
        assert got
        assert sweeps <= 2


class TestBoundedSearch:
    def test_playground_flexible_found(self, fixture_flexible):
        tkb, phi = fixture_flexible
        lasso = oracle.bounded_tcq_sat(phi, tkb, 2, 3, 2)
        assert lasso is not None
        assert oracle.eval_tcq_on_lasso(lasso, phi, tkb.n)

    def test_playground_rigid_not_found(self, fixture_rigid):
        tkb, phi = fixture_rigid
        assert oracle.bounded_tcq_sat(phi, tkb, 2, 3, 2) is None

    def test_true_always_found(self):
        sig = Signature(frozenset({"A"}), frozenset(), frozenset({"a"}))
        tkb = validate_tkb(TKB(Ontology(frozenset(), frozenset()),
                               (abox(ConceptAssertion(Atomic("A"), "a")),),
                               sig))
        assert oracle.bounded_tcq_sat(TrueQ(), tkb, 1, 2, 1) is not None

    def test_bounds_guard(self):
        sig = Signature(frozenset({"A", "B", "C"}), frozenset({"R", "S"}),
                        frozenset({"a"}))
        tkb = validate_tkb(TKB(Ontology(frozenset(), frozenset()),
                               (abox(ConceptAssertion(Atomic("A"), "a")),),
                               sig))
        with pytest.raises(BoundsTooLarge):
            oracle.bounded_tcq_sat(TrueQ(), tkb, 3, 3, 2, cap=10)


class TestBruteEntailment:
    def test_mirror_hom_into_unnamed(self):
        kb = KB(Ontology(frozenset({ci([Atomic("A")], __import__(
            "tcqlite.model", fromlist=["Exists"]).Exists(Role("R")))}),
            frozenset()), abox(ConceptAssertion(Atomic("A"), "a")))
        q = CQ(frozenset({RoleAtom(Role("R"), Ind("a"), Var("x"))}))
        assert oracle.brute_cq_entailed(kb, q)

    def test_mirror_ground_lookup(self):
        from tcqlite.model import RoleAssertion
        kb = KB(Ontology(frozenset(), frozenset()),
                abox(RoleAssertion(Role("R"), "a", "b")))
        q = CQ(frozenset({RoleAtom(Role("R"), Ind("a"), Var("x"))}))
        assert oracle.brute_cq_entailed(kb, q)

    def test_mirror_no_two_cycle(self):
        from tcqlite.model import Exists
        kb = KB(Ontology(frozenset({ci([Atomic("A")], Exists(Role("R")))}),
                         frozenset()),
                abox(ConceptAssertion(Atomic("A"), "a")))
        q = CQ(frozenset({RoleAtom(Role("R"), Var("x"), Var("y")),
                          RoleAtom(Role("R"), Var("y"), Var("x"))}))
        assert not oracle.brute_cq_entailed(kb, q)
