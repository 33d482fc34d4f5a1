import pytest

from tcqlite import ltl, rsat, solver
from tcqlite.model import (
    And, Atomic, CQ, ConceptAssertion, ConceptAtom, FalseQ, Ind, Leaf, Not,
    Ontology, Role, Signature, TKB, Var, abox, ci, negate, normalize_tcq,
    propositional_abstraction, validate_tkb,
)

from conftest import playground_query, playground_tkb


def simple_tkb(cis=(), assertions=(), concepts=("A", "B"), roles=(),
               rigid_c=(), rigid_r=()):
    sig = Signature(frozenset(concepts), frozenset(roles), frozenset(),
                    frozenset(rigid_c), frozenset(rigid_r))
    return validate_tkb(TKB(Ontology(frozenset(cis), frozenset()),
                            (abox(*assertions),), sig))


class TestSatisfiable:
    def test_playground_unsat_with_rigid_roles(self, fixture_rigid):
        tkb, phi = fixture_rigid
        v = solver.satisfiable(phi, tkb)
        assert v.satisfiable is False

    def test_playground_sat_with_flexible_roles(self, fixture_flexible):
        tkb, phi = fixture_flexible
        v = solver.satisfiable(phi, tkb)
        assert v.satisfiable is True

    def test_contradictory_leaf_pair(self):
        tkb = simple_tkb(assertions=[ConceptAssertion(Atomic("A"), "a")])
        q = Leaf(CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))})))
        phi = And(q, Not(q))
        assert solver.satisfiable(phi, tkb).satisfiable is False

    def test_false_never_satisfiable(self):
        tkb = simple_tkb()
        assert solver.satisfiable(FalseQ(), tkb).satisfiable is False


class TestEntails:
    def test_playground_negation_entailed(self, fixture_rigid):
        tkb, phi = fixture_rigid
        assert solver.entails(negate(phi), tkb) is True

    def test_ci_step_entailment(self):
        tkb = simple_tkb([ci([Atomic("B")], Atomic("A"))],
                         [ConceptAssertion(Atomic("B"), "a")])
        phi = Leaf(CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))})))
        assert solver.entails(phi, tkb) is True

    def test_false_not_entailed_by_consistent(self):
        tkb = simple_tkb(assertions=[ConceptAssertion(Atomic("A"), "a")])
        assert solver.entails(FalseQ(), tkb) is False


class TestCertificate:
    def test_replay_through_reference_checkers(self, fixture_flexible):
        tkb, phi = fixture_flexible
        tkb = validate_tkb(tkb)
        v = solver.satisfiable(phi, tkb)
        assert v.satisfiable and v.certificate is not None
        cert = v.certificate
        phi_n = normalize_tcq(phi)
        pa, cqs = propositional_abstraction(phi_n)
        cqs = tuple(cqs)
        ts = ltl.TypeSystem([pa])

        # the world set and iota induced by the run pass the verbatim checker
        w_list = cert.world_set(ts)
        iota = tuple(w_list.index(w) for w in cert.worlds)
        assert rsat.is_r_complete(cert.tup, tuple(w_list), iota, tkb, cqs)
        assert rsat.algorithm2_accepts(cert.tup, tuple(w_list), iota, tkb, cqs)

        # and the type lasso satisfies the propositional abstraction at n
        from tcqlite import oracle
        stem_w = [ts.world_of(t) for t in cert.stem_types]
        cycle_w = [ts.world_of(t) for t in cert.cycle_types]
        assert oracle.eval_ltl_on_word_lasso(pa, stem_w, cycle_w, tkb.n)
        ok, _ = ltl.restricted_sat(pa, set(stem_w) | set(cycle_w),
                                   tuple(cert.worlds), tkb.n)
        assert ok
