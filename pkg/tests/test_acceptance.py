"""The acceptance gate: one test per criterion, each printing a PASS line.

The headline complexity claims are asymptotic and not reproducible at desk
scale; the gate is example- and property-based instead.  Tolerances are exact
(these are decision procedures): every agreement criterion requires 100%.
"""

import itertools
import time

import pytest

from tcqlite import boolkrom, dllite, ltl, oracle, rewrite, rsat, solver
from tcqlite.errors import NotSeparated
from tcqlite.model import (
    Atomic, CQ, ConceptAssertion, Exists, KB, Role, negate, normalize_tcq,
    propositional_abstraction, validate_tkb,
)

from conftest import (playground_query, playground_tkb, random_atemporal,
                      random_cq, random_temporal_instance, seeded)


def report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, name


class TestCriterion1:
    def test_running_example_reproduction(self):
        """Rigid roles make the example unsatisfiable; flexible ones do not;
        both engines agree; the oracle certifies the satisfiable variant."""
        phi = playground_query()
        timings = {}

        t0 = time.monotonic()
        v_solver_rigid = solver.satisfiable(phi, playground_tkb(True))
        timings["solver rigid"] = time.monotonic() - t0
        t0 = time.monotonic()
        v_rw_rigid = rewrite.rewriting_satisfiable(phi, playground_tkb(True))
        timings["rewrite rigid"] = time.monotonic() - t0
        t0 = time.monotonic()
        v_solver_flex = solver.satisfiable(phi, playground_tkb(False))
        timings["solver flexible"] = time.monotonic() - t0
        t0 = time.monotonic()
        v_rw_flex = rewrite.rewriting_satisfiable(phi, playground_tkb(False))
        timings["rewrite flexible"] = time.monotonic() - t0

        lasso = oracle.bounded_tcq_sat(phi, playground_tkb(False), 2, 3, 2)

        ok = (v_solver_rigid.satisfiable is False
              and v_rw_rigid.satisfiable is False
              and v_solver_flex.satisfiable is True
              and v_rw_flex.satisfiable is True
              and lasso is not None
              and all(t < 2.0 for t in timings.values()))
        report("criterion 1: running-example reproduction", ok,
               ", ".join(f"{k} {v:.2f}s" for k, v in timings.items()))


SUITE_SIZE = 200


def suite_instances():
    for seed in range(SUITE_SIZE):
        rng = seeded(10_000 + seed)
        yield random_temporal_instance(rng, max_leaves=3, max_rigid=2)


class TestCriterion2And5:
    def test_duality_and_engine_agreement(self):
        """entails(Φ) == ¬satisfiable(¬Φ) on the generated suite, and the
        rewriting engine agrees with the solver wherever it applies."""
        t0 = time.monotonic()
        checked = agreed = compared = oracle_checked = 0
        for tkb, phi in suite_instances():
            v_pos = solver.satisfiable(phi, tkb)
            v_neg = solver.satisfiable(negate(phi), tkb)
            ent = solver.entails(phi, tkb)
            assert v_pos.satisfiable is not None
            assert v_neg.satisfiable is not None
            assert ent == (not v_neg.satisfiable)
            checked += 1
            try:
                rw = rewrite.rewriting_satisfiable(phi, tkb)
                compared += 1
                if rw.satisfiable == v_pos.satisfiable:
                    agreed += 1
                else:
                    report("criterion 5: engine agreement", False,
                           f"instance {checked - 1}")
            except NotSeparated:
                pass
        elapsed = time.monotonic() - t0
        report("criterion 2: entailment duality", checked >= 200
               and elapsed < 300, f"{checked} instances in {elapsed:.0f}s")
        report("criterion 5: engine agreement",
               compared > 0 and agreed == compared,
               f"{agreed}/{compared} separated instances agree")

    def test_oracle_found_implies_both_sat(self):
        found = confirmed = 0
        for seed in range(40):
            rng = seeded(20_000 + seed)
            tkb, phi = random_temporal_instance(rng, max_leaves=2,
                                                max_rigid=1)
            try:
                lasso = oracle.bounded_tcq_sat(phi, tkb, 2, tkb.n + 2, 1,
                                               cap=400_000)
            except Exception:
                continue
            if lasso is None:
                continue
            found += 1
            v = solver.satisfiable(phi, tkb)
            ok = v.satisfiable is True
            try:
                ok = ok and rewrite.rewriting_satisfiable(
                    phi, tkb).satisfiable
            except NotSeparated:
                pass
            if ok:
                confirmed += 1
        report("criterion 5: oracle Found implies SAT on both engines",
               found > 0 and confirmed == found, f"{confirmed}/{found}")


class TestCriterion3:
    def test_atemporal_triangle(self):
        agree = total = 0
        for seed in range(500):
            rng = seeded(30_000 + seed)
            o, a, concepts, roles, inds = random_atemporal(rng)
            kb = KB(o, a)
            q = random_cq(rng, concepts, roles, inds)
            chase = dllite.cq_entailed(kb, q)
            brute = oracle.brute_cq_entailed(kb, q)
            ok = chase == brute
            if ok and dllite.is_consistent(kb):
                ref = dllite.perfect_ref(q, o)
                ok = chase == dllite.eval_ucq_db(a, ref)
            total += 1
            agree += ok
        report("criterion 3: atemporal oracle triangle", agree == total == 500,
               f"{agree}/{total}")


class TestCriterion4:
    def test_rewriting_equivalences(self):
        """rep over the temporal database vs direct entailment over the
        materialized KB, plus the pref/pref^N column laws, all i in [-1, n]."""
        rep_checked = rep_ok = pref_checked = pref_ok = 0
        instances = 0
        seed = 0
        while instances < 100 and seed < 400:
            seed += 1
            rng = seeded(40_000 + seed)
            tkb, phi = random_temporal_instance(rng, max_leaves=2,
                                                max_rigid=1)
            tkb = validate_tkb(tkb)
            pa, cqs = propositional_abstraction(normalize_tcq(phi))
            ctx = rewrite.RewriteContext(tkb, tuple(cqs))
            m = len(cqs)
            u = frozenset(j for j in range(1, m + 1) if rng.random() < 0.7)
            w = frozenset(j for j in sorted(u) if rng.random() < 0.7)
            skel = ctx.skeleton(u, frozenset(), frozenset())
            if skel is None:
                continue
            instances += 1
            rw = ctx.rep_rewriter(skel, w)
            tree_other = rsat.build_arf(ctx.o, skel.rf_other, ctx.cq_list,
                                        ctx.sig)
            a_kr = frozenset(set(skel.a_r_prime) | rw.const_abox | tree_other)
            queries = [random_cq(rng, ["A", "B"], ["R", "S"], ["a", "b"])
                       for _ in range(2)]
            pref_q = queries[0]
            pref_f = ctx.pref_n(pref_q, skel.a_r_stages, rewrite.TVar("_i")) \
                if pref_q.is_boolean() else None
            plain = rewrite.pref(pref_q, ctx.o) if pref_q.is_boolean() else None
            for i in range(-1, tkb.n + 1):
                a_i = frozenset() if i < 0 else tkb.abox_at(i)
                kb = KB(ctx.o, frozenset(a_kr | a_i))
                inconsistent = not dllite.is_consistent(kb)
                got = rewrite.eval_fo(ctx.tdb, rw.q_unsat_rep(
                    rewrite.TConst(i)))
                rep_checked += 1
                rep_ok += got == inconsistent
                if not inconsistent:
                    for q in queries:
                        if not q.is_boolean():
                            continue
                        direct = dllite.cq_entailed(kb, q)
                        got = rewrite.eval_fo(ctx.tdb,
                                              rw.rep(q, rewrite.TConst(i)))
                        rep_checked += 1
                        rep_ok += got == direct
                if pref_f is not None:
                    kb_ars = KB(ctx.o, frozenset(set(skel.a_r_prime) | a_i))
                    kb_col = KB(ctx.o, a_i)
                    if dllite.is_consistent(kb_ars):
                        direct = dllite.cq_entailed(kb_ars, pref_q)
                        got = rewrite.eval_fo(ctx.tdb, pref_f, {"_i": i})
                        pref_checked += 1
                        pref_ok += got == direct
                    if dllite.is_consistent(kb_col):
                        direct = dllite.cq_entailed(kb_col, pref_q)
                        got = rewrite.eval_fo(ctx.tdb,
                                              plain.at(rewrite.TConst(i)))
                        pref_checked += 1
                        pref_ok += got == direct
        report("criterion 4: rep rewriting equivalence",
               instances >= 100 and rep_ok == rep_checked,
               f"{rep_ok}/{rep_checked} checks on {instances} instances")
        report("criterion 4: pref/pref^N column laws",
               pref_ok == pref_checked, f"{pref_ok}/{pref_checked}")


class TestCriterion6:
    def test_tuple_checker_equivalence(self):
        """Exhaustive tuple enumeration: the verbatim C1-C6 checker matches
        the per-position procedure plus the global coverage check."""
        instances = agreements = disagreements = tuples_checked = 0
        seed = 0
        while instances < 50 and seed < 300:
            seed += 1
            rng = seeded(50_000 + seed)
            # hand-scaled: one individual, tiny signature, 1-2 leaves
            tkb, phi = random_temporal_instance(rng, max_leaves=1,
                                                max_rigid=1)
            tkb = validate_tkb(tkb)
            if len(tkb.individuals()) > 1 or tkb.n > 1:
                continue
            pa, cqs = propositional_abstraction(normalize_tcq(phi))
            cqs = tuple(cqs)
            m = len(cqs)
            inds = tuple(sorted(tkb.individuals()))
            cands = rsat.rigid_candidates(tkb.signature, inds)
            if len(cands) > 3:
                continue
            flex = sorted(tkb.signature.flexible_roles())
            rf_univ = [ConceptAssertion(Exists(Role(s)), b)
                       for s in flex[:1]
                       for b in list(inds) + [rsat.aux_name(v)
                                              for q in cqs
                                              for v in sorted(q.variables())]]
            rf_univ = rf_univ[:2]
            instances += 1
            worlds = [frozenset(c) for k in range(m + 1)
                      for c in itertools.combinations(range(1, m + 1), k)]
            w_list = tuple(worlds[:2]) if len(worlds) >= 2 else tuple(worlds)
            iota = tuple(rng.randrange(len(w_list))
                         for _ in range(tkb.n + 1))
            for a_r in rsat.all_rigid_types(tkb.signature, inds):
                for q_r_bits in range(1 << m):
                    q_r = frozenset(j + 1 for j in range(m)
                                    if q_r_bits >> j & 1)
                    for q_rn_bits in range(1 << m):
                        q_rn = frozenset(j + 1 for j in range(m)
                                         if q_rn_bits >> j & 1)
                        for rf_bits in range(1 << len(rf_univ)):
                            r_f = frozenset(
                                x for k, x in enumerate(rf_univ)
                                if rf_bits >> k & 1)
                            tup = rsat.RCompleteTuple(a_r, q_r, q_rn, r_f)
                            ref = rsat.is_r_complete(tup, w_list, iota, tkb,
                                                     cqs)
                            alg = rsat.algorithm2_accepts(tup, w_list, iota,
                                                          tkb, cqs)
                            tuples_checked += 1
                            if ref == alg:
                                agreements += 1
                            else:
                                disagreements += 1
        report("criterion 6: r-complete characterization",
               instances >= 50 and disagreements == 0,
               f"{agreements}/{tuples_checked} tuples on {instances} instances")


class TestCriterion7:
    def test_canonical_model_law(self):
        """Membership of every unnamed chase element coincides with the
        entailment from its generating seed (on consistent KBs, where the
        canonical model is the least model)."""
        violations = elements = 0
        for seed in range(200):
            rng = seeded(60_000 + seed)
            o, a, concepts, roles, inds = random_atemporal(rng)
            kb = KB(o, a)
            if not dllite.is_consistent(kb):
                continue
            model = dllite.canonical_model(kb, depth=2)
            basics = [Atomic(c) for c in concepts]
            for r in roles:
                basics += [Exists(Role(r)), Exists(Role(r, True))]
            for path, types in model.unnamed.items():
                elements += 1
                last = path[1][-1]
                seed_concept = Exists(last.inverse())
                for b in basics:
                    in_chase = b in types
                    by_law = dllite.concept_entails(o, {seed_concept}, b)
                    if in_chase != by_law:
                        violations += 1
        report("criterion 7: canonical-model unnamed-element law",
               elements > 0 and violations == 0,
               f"{elements} elements, {violations} violations")


class TestCriterion8:
    def test_krom_transformation_equivalence(self):
        t0 = time.monotonic()
        from tcqlite.boolkrom import (AndC, CName, ExistsQ, ExtendedCI,
                                      ForallQ, OrC, ci_to_tcq,
                                      ext_concept_ext)
        name_sets = [("A1", "A2", "A3"), ("P", "Q", "W"), ("M1", "M2", "M3")]
        rows = ["row1", "row2", "row3"]
        checked = failures = 0
        for names in name_sets:
            n1, n2, n3 = names
            for row in rows:
                if row == "row1":
                    e = ExtendedCI(ExistsQ(Role("R"), CName(n1)), CName(n2))
                elif row == "row2":
                    e = ExtendedCI(CName(n1), ForallQ(Role("R"), CName(n2)))
                else:
                    e = ExtendedCI(AndC((CName(n1),)),
                                   OrC((CName(n2), CName(n3))))
                tcqs, aux, fresh = ci_to_tcq(e)
                body = tcqs[0].arg.cq
                import test_boolkrom as tb
                for size in (1, 2):
                    for interp in tb.enumerate_interpretations(
                            list(names) + list(fresh), ["R"],
                            tuple(range(size))):
                        if not all(interp.satisfies_ci(c) for c in aux):
                            continue
                        checked += 1
                        lhs = ext_concept_ext(interp, e.lhs)
                        rhs = ext_concept_ext(interp, e.rhs)
                        holds_ci = lhs <= rhs
                        holds_q = not interp.satisfies_cq(body)
                        if holds_ci != holds_q:
                            failures += 1
        elapsed = time.monotonic() - t0
        report("criterion 8: krom transformation equivalence",
               checked > 0 and failures == 0 and elapsed < 30,
               f"{checked} interpretations in {elapsed:.1f}s")


class TestCriterion9:
    def test_rigid_fixpoint_round_bound(self):
        worst = 0
        for seed in range(100):
            rng = seeded(70_000 + seed)
            tkb, phi = random_temporal_instance(rng)
            tkb = validate_tkb(tkb)
            pa, cqs = propositional_abstraction(normalize_tcq(phi))
            ctx = rewrite.RewriteContext(tkb, tuple(cqs))
            u = frozenset(range(1, len(cqs) + 1))
            skel = ctx.skeleton(u, frozenset(), frozenset())
            if skel is None:
                continue
            bound = max(1, len(ctx.rigid_basics))
            assert skel.rounds_used <= bound, \
                f"{skel.rounds_used} rounds > bound {bound}"
            worst = max(worst, skel.rounds_used)
        report("criterion 9: rigid fixpoint stabilization bound", True,
               f"worst {worst} rounds")
