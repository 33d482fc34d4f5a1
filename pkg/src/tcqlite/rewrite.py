"""The first-order-rewriting decision path.

Consistency and (non-)entailment tests against the per-time-point KBs are
compiled into FO formulas over a fixed two-sorted structure read off the ABox
sequence.  Symbolic individuals (instantiation names, tree names, prototypes)
never reach the evaluator: equalities involving them are resolved to
true/false at construction time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import dllite, ltl, rsat
from .errors import NotSeparated, UnboundVariable
from .model import (
    ABox, Atomic, BasicConcept, CQ, ConceptAssertion, ConceptAtom, Exists,
    Ind, KB, Ontology, Role, RoleAssertion, RoleAtom, Signature, TCQ, TKB,
    Var, atom_terms, is_rigid_concept, normalize_tcq,
    propositional_abstraction, validate_tkb,
)

PRO_PREFIX = "@pro:"

# ---------------------------------------------------------------------------
# FO formulas over the temporal database
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OVar:
    name: str


@dataclass(frozen=True)
class OConst:
    name: str


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TConst:
    value: int


FTerm = Union[OVar, OConst, TVar, TConst]


@dataclass(frozen=True)
class FTrue:
    pass


@dataclass(frozen=True)
class FFalse:
    pass


@dataclass(frozen=True)
class FAtom:
    kind: str                  # "c" | "r" | "negc" | "negr"
    symbol: object             # BasicConcept for c/negc, role name for r/negr
    terms: tuple
    time: FTerm


@dataclass(frozen=True)
class FEq:
    left: FTerm
    right: FTerm


@dataclass(frozen=True)
class FNot:
    arg: "FOFormula"


@dataclass(frozen=True)
class FAnd:
    args: tuple


@dataclass(frozen=True)
class FOr:
    args: tuple


@dataclass(frozen=True)
class FExistsObj:
    var: str
    body: "FOFormula"


@dataclass(frozen=True)
class FExistsTime:
    var: str
    body: "FOFormula"


FOFormula = Union[FTrue, FFalse, FAtom, FEq, FNot, FAnd, FOr, FExistsObj,
                  FExistsTime]


def fand(args) -> FOFormula:
    flat = []
    for a in args:
        if isinstance(a, FFalse):
            return FFalse()
        if isinstance(a, FTrue):
            continue
        if isinstance(a, FAnd):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return FTrue()
    if len(flat) == 1:
        return flat[0]
    return FAnd(tuple(flat))


def f_or(args) -> FOFormula:
    flat = []
    for a in args:
        if isinstance(a, FTrue):
            return FTrue()
        if isinstance(a, FFalse):
            continue
        if isinstance(a, FOr):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return FFalse()
    if len(flat) == 1:
        return flat[0]
    return FOr(tuple(flat))


def fnot(a: FOFormula) -> FOFormula:
    if isinstance(a, FTrue):
        return FFalse()
    if isinstance(a, FFalse):
        return FTrue()
    if isinstance(a, FNot):
        return a.arg
    return FNot(a)


# ---------------------------------------------------------------------------
# Temporal database
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TDB:
    """Closed-world positive store over objects × [-1, n]; time point -1 is
    the prototypical empty ABox.  Negative assertions live in a separate
    store consulted only by the inconsistency rewritings."""

    objects: tuple
    n: int
    concepts: dict
    roles: dict
    neg_concepts: dict
    neg_roles: dict

    def has_concept(self, b: BasicConcept, a: str, i: int) -> bool:
        return (a, i) in self.concepts.get(b, ())

    def has_role(self, rname: str, a: str, b: str, i: int) -> bool:
        return (a, b, i) in self.roles.get(rname, ())


def build_tdb(abox_seq: Iterable[ABox], extra_objects: Iterable[str] = ()) -> TDB:
    concepts: dict = {}
    roles: dict = {}
    neg_c: dict = {}
    neg_r: dict = {}
    objects: set[str] = set(extra_objects)
    seq = list(abox_seq)
    for i, a in enumerate(seq):
        for assn in a:
            if isinstance(assn, ConceptAssertion):
                objects.add(assn.individual)
                store = concepts if assn.positive else neg_c
                store.setdefault(assn.concept, set()).add((assn.individual, i))
            else:
                na = assn.normalized()
                objects |= {na.subj, na.obj}
                store = roles if na.positive else neg_r
                store.setdefault(na.role.name, set()).add((na.subj, na.obj, i))
    return TDB(tuple(sorted(objects)), len(seq) - 1,
               {k: frozenset(v) for k, v in concepts.items()},
               {k: frozenset(v) for k, v in roles.items()},
               {k: frozenset(v) for k, v in neg_c.items()},
               {k: frozenset(v) for k, v in neg_r.items()})


def eval_fo(tdb: TDB, f: FOFormula, env: Optional[dict] = None) -> bool:
    """Standard two-sorted Tarskian evaluation; ∃-object ranges over the
    stored objects, ∃-time over [-1, n]."""
    env = env if env is not None else {}

    def term(t: FTerm):
        if isinstance(t, OConst):
            return t.name
        if isinstance(t, TConst):
            return t.value
        if isinstance(t, (OVar, TVar)):
            if t.name not in env:
                raise UnboundVariable(t.name)
            return env[t.name]
        raise TypeError(t)

    def go(node: FOFormula) -> bool:
        if isinstance(node, FTrue):
            return True
        if isinstance(node, FFalse):
            return False
        if isinstance(node, FAtom):
            i = term(node.time)
            if i < 0:
                return False
            if node.kind == "c":
                return tdb.has_concept(node.symbol, term(node.terms[0]), i)
            if node.kind == "r":
                return tdb.has_role(node.symbol, term(node.terms[0]),
                                    term(node.terms[1]), i)
            if node.kind == "negc":
                return (term(node.terms[0]), i) in tdb.neg_concepts.get(
                    node.symbol, ())
            if node.kind == "negr":
                return (term(node.terms[0]), term(node.terms[1]), i) in \
                    tdb.neg_roles.get(node.symbol, ())
            raise TypeError(node.kind)
        if isinstance(node, FEq):
            return term(node.left) == term(node.right)
        if isinstance(node, FNot):
            return not go(node.arg)
        if isinstance(node, FAnd):
            return all(go(a) for a in node.args)
        if isinstance(node, FOr):
            return any(go(a) for a in node.args)
        if isinstance(node, (FExistsObj, FExistsTime)):
            missing = object()
            prior = env.get(node.var, missing)
            domain = tdb.objects if isinstance(node, FExistsObj) \
                else range(-1, tdb.n + 1)
            found = False
            for val in domain:
                env[node.var] = val
                if go(node.body):
                    found = True
                    break
            if prior is missing:
                env.pop(node.var, None)
            else:
                env[node.var] = prior
            return found
        raise TypeError(node)

    return go(f)


def fo_answers(tdb: TDB, f: FOFormula, free_vars: tuple) -> set:
    out = set()
    for combo in itertools.product(tdb.objects, repeat=len(free_vars)):
        env = dict(zip(free_vars, combo))
        if eval_fo(tdb, f, env):
            out.add(combo)
    return out


# ---------------------------------------------------------------------------
# pref: timestamped query rewriting over a single ABox column
# ---------------------------------------------------------------------------


def _oterm(t) -> FTerm:
    return OConst(t.name) if isinstance(t, Ind) else OVar(t.name)


def _cq_to_fo(q: CQ, time: FTerm) -> FOFormula:
    atoms = []
    for a in sorted(q.atoms, key=str):
        if isinstance(a, ConceptAtom):
            atoms.append(FAtom("c", a.concept, (_oterm(a.term),), time))
        else:
            atoms.append(FAtom("r", a.role.name,
                               (_oterm(a.subj), _oterm(a.obj)), time))
    body = fand(atoms)
    for v in sorted(q.quantified_vars()):
        body = FExistsObj(v, body)
    return body


def ucq_to_fo(ucq: Iterable[CQ], time: FTerm) -> FOFormula:
    return f_or([_cq_to_fo(q, time) for q in ucq])


class Pref:
    """pref(q, o): the atemporal rewriting with every atom stamped by a time
    term, so that evaluation at i decides entailment over ⟨o, A_i⟩."""

    def __init__(self, q: Union[CQ, Iterable[CQ]], o: Ontology):
        self.ucq = dllite.perfect_ref(q, o)

    def at(self, time: FTerm) -> FOFormula:
        return ucq_to_fo(self.ucq, time)


def pref(q, o: Ontology) -> Pref:
    return Pref(q, o)


def q_unsat_fo(o: Ontology, sig: Signature, time: FTerm) -> FOFormula:
    """The single-column inconsistency rewriting (data negatives included)."""
    qs = dllite.q_unsat(o, sig.concept_names, sig.role_names)
    if qs.always:
        return FTrue()
    parts = [ucq_to_fo(qs.bottom_ucq, time)]
    for b, ucq in qs.neg_concept:
        body = fand([FAtom("negc", b, (OVar("x"),), time),
                     ucq_to_fo(ucq, time)])
        parts.append(FExistsObj("x", body))
    for rname, ucq in qs.neg_role:
        body = fand([FAtom("negr", rname, (OVar("x"), OVar("y")), time),
                     ucq_to_fo(ucq, time)])
        parts.append(FExistsObj("x", FExistsObj("y", body)))
    return f_or(parts)


# ---------------------------------------------------------------------------
# Names for prototypes
# ---------------------------------------------------------------------------


def proto_root(s_name: str) -> str:
    return f"[{s_name}]"


def proto_name(s_name: str, path: tuple) -> str:
    return f"{PRO_PREFIX}{s_name}:" + ".".join(
        r.name + ("-" if r.inverted else "") for r in path)


def _is_symbolic(name: str) -> bool:
    return (name.startswith(rsat.AUX_PREFIX)
            or name.startswith(rsat.TREE_PREFIX)
            or name.startswith(PRO_PREFIX)
            or (name.startswith("[") and name.endswith("]")))


# ---------------------------------------------------------------------------
# Rewrite context and skeletons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TupleSkeleton:
    """(A_R', Q_R', Q_Rn', R_F' split into its three disjoint name pools)."""

    a_r_prime: frozenset
    a_r_stages: tuple
    rounds_used: int
    q_r_prime: frozenset
    q_rn_prime: frozenset
    rf_aux: frozenset
    rf_phi: frozenset
    rf_other: frozenset

    def r_f(self) -> frozenset:
        return self.rf_aux | self.rf_phi | self.rf_other


class RewriteContext:
    """Per-(TKB, leaf list) home of the temporal database and every memoized
    rewriting piece; heavy parts are keyed by (Q_R', B_phi) so that the
    enumeration over Q_Rn' choices stays cheap."""

    def __init__(self, tkb: TKB, cq_list: tuple):
        self.tkb = tkb
        self.o = tkb.ontology
        self.sig = tkb.signature
        self.cq_list = cq_list
        self.phi_inds = frozenset(i for q in cq_list for i in q.individuals())
        self.data_inds = tkb.individuals()
        self.all_inds = tuple(sorted(self.data_inds | self.phi_inds))
        self.tdb = build_tdb(tkb.aboxes, self.phi_inds)
        self.octx = dllite.ctx(self.o)
        self._var_counter = itertools.count()
        self.rigid_basics: list[BasicConcept] = [
            Atomic(a) for a in sorted(self.sig.rigid_concepts)]
        for r in sorted(self.sig.rigid_roles):
            self.rigid_basics += [Exists(Role(r)), Exists(Role(r, True))]
        self.flex_roles = sorted(self.sig.flexible_roles())
        self.all_basics: list[BasicConcept] = [
            Atomic(a) for a in sorted(self.sig.concept_names)]
        for r in sorted(self.sig.role_names):
            self.all_basics += [Exists(Role(r)), Exists(Role(r, True))]
        self.tree_depth = max((len(q.variables()) for q in cq_list), default=0)
        self._skel_cache: dict = {}
        self._rep_cache: dict = {}
        self._c12_cache: dict = {}
        self._c5_cache: dict = {}
        self._bs_cache: dict = {}
        self._rigcons_cache: dict = {}
        self._prefj_closed: dict = {}

    # -- small helpers -------------------------------------------------------

    def fresh_tvar(self) -> TVar:
        return TVar(f"_p{next(self._var_counter)}")

    def fresh_ovar(self) -> str:
        return f"_o{next(self._var_counter)}"

    def _atom_query(self, atom) -> CQ:
        free = tuple(sorted({t.name for t in atom_terms(atom)
                             if isinstance(t, Var)}))
        return CQ(frozenset({atom}), free)

    def is_rigid_atom(self, atom) -> bool:
        if isinstance(atom, ConceptAtom):
            return is_rigid_concept(atom.concept, self.sig)
        return atom.role.name in self.sig.rigid_roles

    def rigcons(self, leaf_set: frozenset) -> Optional[frozenset]:
        hit = self._rigcons_cache.get(leaf_set)
        if hit is None:
            try:
                hit = rsat.rigid_consequences(
                    self.o, (self.cq_list[j - 1] for j in sorted(leaf_set)),
                    self.sig)
            except rsat.InconsistentInstantiation:
                hit = "bad"
            self._rigcons_cache[leaf_set] = hit
        return None if hit == "bad" else hit

    # -- the A_R' fixpoint -----------------------------------------------------

    def ars_materialize(self, a_r0: frozenset):
        """Iterate the rigid-consequence fixpoint from stage 0; entailment is
        read off the positive chase, so negative clashes (handled by f_C1) do
        not blow the stages up.  Returns (stages, full A_R', rounds)."""
        cands = rsat.rigid_candidates(self.sig, self.all_inds)
        stages = [frozenset(a_r0)]
        while True:
            cur = stages[-1]
            new = set()
            for i in range(self.tkb.n + 1):
                kb = KB(self.o, frozenset(set(cur) | self.tkb.abox_at(i)))
                m = dllite._canonical(kb, frozenset(self.all_inds))
                for cand in cands:
                    if cand in new:
                        continue
                    if isinstance(cand, ConceptAssertion):
                        if cand.individual in m.named and m.has_concept(
                                cand.individual, cand.concept):
                            new.add(cand)
                    elif (cand.subj, cand.obj) in m.role_pairs.get(
                            cand.role.name, set()):
                        new.add(cand)
            if frozenset(new) == cur:
                break
            stages.append(frozenset(new))
        full = rsat.complete_with_negatives(self.sig, stages[-1], self.all_inds)
        return tuple(stages), full, len(stages) - 1

    # -- pref^j tower ----------------------------------------------------------

    def pref_j(self, q: Union[CQ, Iterable[CQ]], j: int, stages: tuple,
               time: FTerm) -> FOFormula:
        ucq = dllite.perfect_ref(q, self.o)
        return f_or([self._cq_prefj(cq, j, stages, time) for cq in ucq])

    def _cq_prefj(self, q: CQ, j: int, stages: tuple, time: FTerm) -> FOFormula:
        parts = [self._atom_prefj(a, j, stages, time)
                 for a in sorted(q.atoms, key=str)]
        body = fand(parts)
        for v in sorted(q.quantified_vars()):
            body = FExistsObj(v, body)
        return body

    def _atom_fo(self, atom, time: FTerm) -> FOFormula:
        if isinstance(atom, ConceptAtom):
            return FAtom("c", atom.concept, (_oterm(atom.term),), time)
        return FAtom("r", atom.role.name,
                     (_oterm(atom.subj), _oterm(atom.obj)), time)

    def _atom_prefj(self, atom, j: int, stages: tuple, time: FTerm) -> FOFormula:
        if not self.is_rigid_atom(atom):
            return self._atom_fo(atom, time)
        base = self._atom_fo(atom, time)
        if j == 0:
            eqs = []
            for assn in sorted(stages[0], key=str):
                eq = _match_assertion(atom, assn)
                if eq is not None:
                    eqs.append(eq)
            return f_or([base] + eqs)
        # the recursive part is closed in the time sort; share it per level
        key = (atom, j, stages[0], len(stages))
        inner = self._prefj_closed.get(key)
        if inner is None:
            p = TVar(f"_pj{j}")
            inner = FExistsTime(
                p.name, self.pref_j(self._atom_query(atom), j - 1, stages, p))
            self._prefj_closed[key] = inner
        return f_or([base, inner])

    def pref_n(self, q, stages: tuple, time: FTerm) -> FOFormula:
        return self.pref_j(q, len(stages) - 1, stages, time)

    # -- skeletons (heavy part independent of Q_Rn') ---------------------------

    def skeleton(self, u_set: frozenset, b_phi: frozenset,
                 v_set: frozenset) -> Optional[TupleSkeleton]:
        key = (u_set, b_phi)
        hit = self._skel_cache.get(key)
        if hit is None:
            hit = self._build_skeleton_heavy(u_set, b_phi)
            self._skel_cache[key] = hit
        if hit == "bad":
            return None
        stages, full, rounds, rf_aux, rf_phi, rf_other = hit
        return TupleSkeleton(full, stages, rounds, u_set, v_set,
                             rf_aux, rf_phi, rf_other)

    def _build_skeleton_heavy(self, u_set: frozenset, b_phi: frozenset):
        o, sig = self.o, self.sig
        rigcons_u = self.rigcons(u_set)
        if rigcons_u is None:
            return "bad"
        cands = set(rsat.rigid_candidates(sig, self.all_inds))
        a_r0 = frozenset((set(b_phi) | set(rigcons_u)) & cands)
        stages, full, rounds = self.ars_materialize(a_r0)

        rf_aux = set()
        for j in sorted(u_set):
            q = self.cq_list[j - 1]
            kb = KB(o, rsat.instantiate([q]))
            if dllite.is_consistent(kb):
                for s in self.flex_roles:
                    for x in sorted(q.variables()):
                        ax = rsat.aux_name(x)
                        cq = CQ(frozenset({ConceptAtom(Exists(Role(s)),
                                                       Ind(ax))}))
                        if dllite.cq_entailed(kb, cq):
                            rf_aux.add(ConceptAssertion(Exists(Role(s)), ax))
        rf_phi = frozenset(a for a in b_phi
                           if isinstance(a.concept, Exists)
                           and a.concept.role.name in sig.flexible_roles())
        rf_other = set()
        for a in sorted(self.data_inds - self.phi_inds):
            for s in self.flex_roles:
                cq = CQ(frozenset({ConceptAtom(Exists(Role(s)), Ind(a))}))
                for i in range(self.tkb.n + 1):
                    kb = KB(o, frozenset(set(stages[-1]) | self.tkb.abox_at(i)))
                    if dllite.cq_entailed(kb, cq):
                        rf_other.add(ConceptAssertion(Exists(Role(s)), a))
                        break
        pools = [{a.individual for a in rf_aux},
                 {a.individual for a in rf_phi},
                 {a.individual for a in rf_other}]
        assert not (pools[0] & pools[1] or pools[0] & pools[2]
                    or pools[1] & pools[2]), "R_F' pools must be disjoint"
        return (stages, full, rounds, frozenset(rf_aux), rf_phi,
                frozenset(rf_other))

    # -- memoized evaluation entry points --------------------------------------

    def rep_rewriter(self, skel: TupleSkeleton, w: frozenset) -> "RepRewriter":
        key = (skel.q_r_prime, skel.rf_phi, skel.a_r_stages[0], w)
        hit = self._rep_cache.get(key)
        if hit is None:
            hit = RepRewriter(self, skel, w)
            self._rep_cache[key] = hit
        return hit

    def _skel_key(self, skel: TupleSkeleton, w: frozenset):
        return (skel.q_r_prime, skel.rf_phi, skel.a_r_stages[0], w)

    def c12_holds(self, skel: TupleSkeleton, w: frozenset, i: int) -> bool:
        """f_C1 ∧ f_C2 at time i (independent of Q_Rn')."""
        key = self._skel_key(skel, w) + (i,)
        hit = self._c12_cache.get(key)
        if hit is None:
            fkey = ("c12f",) + self._skel_key(skel, w)
            f = self._c12_cache.get(fkey)
            if f is None:
                rw = self.rep_rewriter(skel, w)
                t = TVar("_i")
                f = fand([fnot(rw.q_unsat_rep(t))]
                         + [fnot(rw.rep(self.cq_list[j - 1], t))
                            for j in range(1, len(self.cq_list) + 1)
                            if j not in w])
                self._c12_cache[fkey] = f
            hit = eval_fo(self.tdb, f, {"_i": i})
            self._c12_cache[key] = hit
        return hit

    def c5_leaf_holds(self, skel: TupleSkeleton, w: frozenset, i: int,
                      j: int) -> bool:
        """No rigid witness query of leaf j is rep-entailed at time i."""
        key = self._skel_key(skel, w) + (i, j)
        hit = self._c5_cache.get(key)
        if hit is None:
            fkey = ("c5f",) + self._skel_key(skel, w) + (j,)
            f = self._c5_cache.get(fkey)
            if f is None:
                rw = self.rep_rewriter(skel, w)
                t = TVar("_i")
                f = fand([fnot(rw.rep(psi, t))
                          for psi in rsat.witness_queries(
                              self.o, self.cq_list[j - 1], self.sig)])
                self._c5_cache[fkey] = f
            hit = eval_fo(self.tdb, f, {"_i": i})
            self._c5_cache[key] = hit
        return hit

    def rsat_holds(self, skel: TupleSkeleton, w: frozenset, i: int) -> bool:
        return self.c12_holds(skel, w, i) and all(
            self.c5_leaf_holds(skel, w, i, j)
            for j in sorted(skel.q_rn_prime))

    def exists_entailed(self, skel: TupleSkeleton, w: frozenset,
                        s_name: str, a: str, i: int) -> bool:
        key = self._skel_key(skel, w) + (s_name, a, i)
        hit = self._bs_cache.get(key)
        if hit is None:
            fkey = ("bsf",) + self._skel_key(skel, w) + (s_name, a)
            f = self._bs_cache.get(fkey)
            if f is None:
                rw = self.rep_rewriter(skel, w)
                q = CQ(frozenset({ConceptAtom(Exists(Role(s_name)), Ind(a))}))
                f = rw.rep(q, TVar("_i"))
                self._bs_cache[fkey] = f
            hit = eval_fo(self.tdb, f, {"_i": i})
            self._bs_cache[key] = hit
        return hit


def _match_assertion(atom, assn) -> Optional[FOFormula]:
    """Equality of an atom against a ground assertion over real names."""
    if isinstance(atom, ConceptAtom):
        if not isinstance(assn, ConceptAssertion) or not assn.positive \
                or assn.concept != atom.concept:
            return None
        return _eq_real(atom.term, assn.individual)
    if not isinstance(assn, RoleAssertion) or not assn.positive \
            or assn.role.name != atom.role.name:
        return None
    return fand([_eq_real(atom.subj, assn.subj), _eq_real(atom.obj, assn.obj)])


def _eq_real(term, name: str) -> FOFormula:
    if isinstance(term, Ind):
        return FTrue() if term.name == name else FFalse()
    return FEq(OVar(term.name), OConst(name))


def build_skeleton(ctx: RewriteContext, u_set: frozenset, v_set: frozenset,
                   b_phi: frozenset) -> Optional[TupleSkeleton]:
    return ctx.skeleton(u_set, b_phi, v_set)


def ars_materialize(o: Ontology, tkb: TKB, cq_list: tuple, u_set: frozenset,
                    b_phi: frozenset):
    """Public wrapper for the rigid fixpoint of one skeleton choice."""
    ctx = RewriteContext(tkb, cq_list)
    skel = ctx.skeleton(u_set, b_phi, frozenset())
    if skel is None:
        return None
    return skel.a_r_stages, skel.a_r_prime, skel.rounds_used


# ---------------------------------------------------------------------------
# rep: the full rewriting against A_KR' ∪ A_i
# ---------------------------------------------------------------------------


class RepRewriter:
    """Builds rep{q}(i) for one (skeleton heavy part, W) pair."""

    def __init__(self, ctx: RewriteContext, skel: TupleSkeleton, w: frozenset):
        self.ctx = ctx
        self.skel = skel
        self.w = w
        o, sig = ctx.o, ctx.sig
        cq_list = ctx.cq_list
        self.a_qw = rsat.instantiate(cq_list[j - 1] for j in sorted(w))
        rigcons_full = ctx.rigcons(skel.q_r_prime) or frozenset()
        tree_aux = rsat.build_arf(o, skel.rf_aux, cq_list, sig)
        tree_phi = rsat.build_arf(o, skel.rf_phi, cq_list, sig)
        self.const_abox = frozenset(rigcons_full | self.a_qw
                                    | tree_aux | tree_phi)
        self.aux_names = sorted(rsat.aux_individuals(cq_list))
        tree_names: set[str] = set()
        for a in tree_aux | tree_phi:
            if isinstance(a, ConceptAssertion):
                tree_names.add(a.individual)
            else:
                for x in (a.subj, a.obj):
                    if x.startswith(rsat.TREE_PREFIX):
                        tree_names.add(x)
        self.tree_names = sorted(tree_names)
        self.proto: dict = {}
        self.proto_templates: dict = {}
        for s in ctx.flex_roles:
            tmpl = rsat._arf_template(o, sig, Role(s), ctx.tree_depth)
            self.proto_templates[s] = tmpl
            paths = {item[2] if item[0] == "c" else item[3] for item in tmpl}
            for p in paths:
                self.proto[proto_name(s, p)] = (s, p)
        self.symbolic = list(self.aux_names) + list(self.tree_names) + \
            sorted(self.proto)
        self.const_abox_sorted = sorted(self.const_abox, key=str)
        # slot indexes for pruning the variant expansion
        self._concept_names: dict = {}
        self._role_subj: dict = {}
        self._role_obj: dict = {}
        for assn in self.const_abox_sorted:
            if isinstance(assn, ConceptAssertion):
                self._concept_names.setdefault(assn.concept, set()).add(
                    assn.individual)
            else:
                self._role_subj.setdefault(assn.role.name, set()).add(assn.subj)
                self._role_obj.setdefault(assn.role.name, set()).add(assn.obj)
        self._proto_concepts: dict = {}
        self._proto_edge_subj: dict = {}
        self._proto_edge_obj: dict = {}
        for s, tmpl in self.proto_templates.items():
            for item in tmpl:
                if item[0] == "c":
                    self._proto_concepts.setdefault(item[1], set()).add(
                        proto_name(s, item[2]))
                else:
                    kind, rn, p_from, p_to = item
                    subj_path, obj_path = (p_from, p_to) if kind == "r" \
                        else (p_to, p_from)
                    if subj_path:
                        self._proto_edge_subj.setdefault(rn, set()).add(
                            proto_name(s, subj_path))
                    if obj_path:
                        self._proto_edge_obj.setdefault(rn, set()).add(
                            proto_name(s, obj_path))
        self._rep_cache: dict = {}

    def _feasible_values(self, q: CQ, v: str) -> list:
        """Symbolic constants the variable can take without making one of its
        atoms trivially false in every branch."""
        feasible = set(self.symbolic)
        for atom in q.atoms:
            if isinstance(atom, ConceptAtom):
                if isinstance(atom.term, Var) and atom.term.name == v:
                    ok = self._concept_names.get(atom.concept, set()) \
                        | self._proto_concepts.get(atom.concept, set())
                    feasible &= ok
            else:
                rn = atom.role.name
                if isinstance(atom.subj, Var) and atom.subj.name == v:
                    ok = self._role_subj.get(rn, set()) \
                        | self._proto_edge_subj.get(rn, set())
                    feasible &= ok
                if isinstance(atom.obj, Var) and atom.obj.name == v:
                    ok = self._role_obj.get(rn, set()) \
                        | self._proto_edge_obj.get(rn, set())
                    feasible &= ok
        return [None] + [s for s in self.symbolic if s in feasible]

    # -- rep for one query ------------------------------------------------

    def rep(self, q: Union[CQ, Iterable[CQ]], time: FTerm) -> FOFormula:
        from .model import cq_canonical_key
        if isinstance(q, CQ):
            key = (cq_canonical_key(q), frozenset(q.individuals()), time)
            hit = self._rep_cache.get(key)
            if hit is not None:
                return hit
        else:
            key = None
        ucq = dllite.perfect_ref(q, self.ctx.o)
        out = f_or([self._rep_cq(cq, time) for cq in ucq])
        if key is not None:
            self._rep_cache[key] = out
        return out

    def _rep_cq(self, q: CQ, time: FTerm) -> FOFormula:
        qvars = sorted(q.quantified_vars())
        options = [self._feasible_values(q, v) for v in qvars]
        variants = []
        for combo in itertools.product(*options):
            subst = {v: c for v, c in zip(qvars, combo) if c is not None}
            body = self._variant_body(q, subst, time)
            if isinstance(body, FFalse):
                continue
            for v in qvars:
                if v not in subst:
                    body = FExistsObj(v, body)
            variants.append(body)
        return f_or(variants)

    def _variant_body(self, q: CQ, subst: dict, time: FTerm) -> FOFormula:
        parts = []
        for atom in sorted(q.atoms, key=str):
            r = self._rep_atom(atom, subst, time)
            if isinstance(r, FFalse):
                return FFalse()
            parts.append(r)
        filt = self._filter(q, subst)
        if isinstance(filt, FFalse):
            return FFalse()
        return fand(parts + [filt])

    def _term(self, t, subst: dict):
        if isinstance(t, Var) and t.name in subst:
            return subst[t.name]
        return t

    def _rep_atom(self, atom, subst: dict, time: FTerm) -> FOFormula:
        terms = [self._term(t, subst) for t in atom_terms(atom)]
        return f_or([self._rep1(atom, terms, time),
                     self._rep2(atom, terms),
                     self._rep3(atom, terms)])

    def _rep1(self, atom, terms, time: FTerm) -> FOFormula:
        if any(isinstance(t, str) for t in terms):
            return FFalse()
        if self.ctx.is_rigid_atom(atom):
            return self.ctx.pref_n(self.ctx._atom_query(atom),
                                   self.skel.a_r_stages, time)
        return self.ctx._atom_fo(atom, time)

    def _rep2(self, atom, terms) -> FOFormula:
        out = []
        for assn in self.const_abox_sorted:
            eq = self._match(atom, terms, assn)
            if eq is not None:
                out.append(eq)
        return f_or(out)

    def _match(self, atom, terms, assn) -> Optional[FOFormula]:
        if isinstance(atom, ConceptAtom):
            if not isinstance(assn, ConceptAssertion) or not assn.positive \
                    or assn.concept != atom.concept:
                return None
            return self._repo_eq(terms[0], assn.individual)
        if not isinstance(assn, RoleAssertion) or not assn.positive \
                or assn.role.name != atom.role.name:
            return None
        return fand([self._repo_eq(terms[0], assn.subj),
                     self._repo_eq(terms[1], assn.obj)])

    def _repo_eq(self, t, name: str) -> FOFormula:
        t_sym = isinstance(t, str)
        n_sym = _is_symbolic(name)
        if t_sym and n_sym:
            return FTrue() if t == name else FFalse()
        if t_sym or n_sym:
            return FFalse()
        return _eq_real(t, name)

    def _rep_exists_root(self, s_name: str, root_term) -> FOFormula:
        """rep_x{∃S}: the term denotes the root of a data-dependent tree."""
        p = self.ctx.fresh_tvar()
        if isinstance(root_term, Ind):
            q = CQ(frozenset({ConceptAtom(Exists(Role(s_name)), root_term)}))
            x_fo: FTerm = OConst(root_term.name)
        else:
            q = CQ(frozenset({ConceptAtom(Exists(Role(s_name)), root_term)}),
                   (root_term.name,))
            x_fo = OVar(root_term.name)
        inner = self.ctx.pref_n(q, self.skel.a_r_stages, p)
        neq = [fnot(FEq(x_fo, OConst(a))) for a in sorted(self.ctx.phi_inds)]
        return fand([FExistsTime(p.name, inner)] + neq)

    def _rep3(self, atom, terms) -> FOFormula:
        protos = [t for t in terms if isinstance(t, str) and t in self.proto]
        if not protos:
            return FFalse()
        if isinstance(atom, ConceptAtom):
            s_name, path = self.proto[terms[0]]
            if self._template_has_concept(s_name, atom.concept, path):
                y = Var(self.ctx.fresh_ovar())
                return FExistsObj(y.name, self._rep_exists_root(s_name, y))
            return FFalse()
        t1, t2 = terms
        p1 = self.proto.get(t1) if isinstance(t1, str) else None
        p2 = self.proto.get(t2) if isinstance(t2, str) else None
        if p1 and p2:
            s1, path1 = p1
            s2, path2 = p2
            if s1 == s2 and self._template_has_edge(s1, atom.role.name,
                                                    path1, path2):
                y = Var(self.ctx.fresh_ovar())
                return FExistsObj(y.name, self._rep_exists_root(s1, y))
            return FFalse()
        if p2 and not isinstance(t1, str):
            s_name, path = p2
            if len(path) == 1 and self._template_has_edge(
                    s_name, atom.role.name, (), path):
                return self._rep_exists_root(s_name, t1)
            return FFalse()
        if p1 and not isinstance(t2, str):
            s_name, path = p1
            if len(path) == 1 and self._template_has_edge(
                    s_name, atom.role.name, path, ()):
                return self._rep_exists_root(s_name, t2)
            return FFalse()
        return FFalse()

    def _template_has_concept(self, s_name: str, b: BasicConcept,
                              path: tuple) -> bool:
        return any(item[0] == "c" and item[1] == b and item[2] == path
                   for item in self.proto_templates[s_name])

    def _template_has_edge(self, s_name: str, rname: str, p_from: tuple,
                           p_to: tuple) -> bool:
        for item in self.proto_templates[s_name]:
            if item[0] == "r" and item[1] == rname \
                    and item[2] == p_from and item[3] == p_to:
                return True
            if item[0] == "r-" and item[1] == rname \
                    and item[3] == p_from and item[2] == p_to:
                return True
        return False

    def _filter(self, q: CQ, subst: dict) -> FOFormula:
        """ψ_filter: non-prototype terms sharing one prototype in role atoms
        all denote the same tree root."""
        conj = []
        by_proto: dict = {}
        for atom in sorted(q.atoms, key=str):
            if not isinstance(atom, RoleAtom):
                continue
            ts = [self._term(t, subst) for t in (atom.subj, atom.obj)]
            for idx, t in enumerate(ts):
                if isinstance(t, str) and t in self.proto:
                    other = ts[1 - idx]
                    if not (isinstance(other, str) and other in self.proto):
                        by_proto.setdefault(t, []).append(other)
        for t in sorted(by_proto):
            for a, b in itertools.combinations(by_proto[t], 2):
                conj.append(self._neighbour_eq(a, b))
        return fand(conj)

    def _neighbour_eq(self, a, b) -> FOFormula:
        a_sym, b_sym = isinstance(a, str), isinstance(b, str)
        if a_sym and b_sym:
            return FTrue() if a == b else FFalse()
        if a_sym or b_sym:
            return FFalse()
        ta = OConst(a.name) if isinstance(a, Ind) else OVar(a.name)
        tb = OConst(b.name) if isinstance(b, Ind) else OVar(b.name)
        return FEq(ta, tb)

    # -- inconsistency rewriting against A_KR' ∪ A_i ------------------------

    def q_unsat_rep(self, time: FTerm) -> FOFormula:
        ctx = self.ctx
        if ctx.octx.top_inconsistent():
            return FTrue()
        parts = []
        for lhs in ctx.octx.bottom_lhs:
            x = Var("_bx")
            q = CQ(frozenset(ConceptAtom(b, x) for b in lhs))
            parts.append(self.rep(q, time))
        for b in ctx.all_basics:
            q = CQ(frozenset({ConceptAtom(b, Var("_nx"))}), ("_nx",))
            parts.append(FExistsObj("_nx", fand([
                FAtom("negc", b, (OVar("_nx"),), time), self.rep(q, time)])))
        for rname in sorted(ctx.sig.role_names):
            q = CQ(frozenset({RoleAtom(Role(rname), Var("_nx"), Var("_ny"))}),
                   ("_nx", "_ny"))
            parts.append(FExistsObj("_nx", FExistsObj("_ny", fand([
                FAtom("negr", rname, (OVar("_nx"), OVar("_ny")), time),
                self.rep(q, time)]))))
        # a derived rigid negative in A_R' clashing with a tree-forced positive
        for b in ctx.rigid_basics:
            q = CQ(frozenset({ConceptAtom(b, Var("_dx"))}), ("_dx",))
            p = ctx.fresh_tvar()
            in_ars = FExistsTime(p.name,
                                 ctx.pref_n(q, self.skel.a_r_stages, p))
            parts.append(FExistsObj("_dx", fand([fnot(in_ars),
                                                 self.rep(q, time)])))
        return f_or(parts)


def rep_rewrite(ctx: RewriteContext, skel: TupleSkeleton, w: frozenset,
                q, time: FTerm) -> FOFormula:
    return ctx.rep_rewriter(skel, w).rep(q, time)


def f_sat(ctx: RewriteContext, skel: TupleSkeleton, w: frozenset,
          time: FTerm) -> FOFormula:
    """rsat[W](i) = f_C1 ∧ f_C2 ∧ f_C5."""
    rw = ctx.rep_rewriter(skel, w)
    conj = [fnot(rw.q_unsat_rep(time))]
    for j in range(1, len(ctx.cq_list) + 1):
        if j not in w:
            conj.append(fnot(rw.rep(ctx.cq_list[j - 1], time)))
    for j in sorted(skel.q_rn_prime):
        for psi in rsat.witness_queries(ctx.o, ctx.cq_list[j - 1], ctx.sig):
            conj.append(fnot(rw.rep(psi, time)))
    return fand(conj)


def check_conditions(ctx: RewriteContext, skel: TupleSkeleton, w_list: tuple,
                     b_phi: frozenset, world_seq: tuple) -> bool:
    """Conditions (a)-(c) for an explicit world sequence w_0..w_n."""
    for i, w in enumerate(world_seq):
        if not ctx.rsat_holds(skel, w, i):
            return False
    for w in w_list:
        if not ctx.rsat_holds(skel, w, -1):
            return False
    b_phi_flex = {(a.concept.role.name, a.individual)
                  for a in b_phi if isinstance(a.concept, Exists)
                  and a.concept.role.name in ctx.sig.flexible_roles()}
    for s in ctx.flex_roles:
        for a in sorted(ctx.phi_inds):
            hit = any(ctx.exists_entailed(skel, w, s, a, i)
                      for i, w in enumerate(world_seq))
            if hit != ((s, a) in b_phi_flex):
                return False
    return True


# ---------------------------------------------------------------------------
# The rewriting-based satisfiability decision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RewriteVerdict:
    satisfiable: bool
    worlds: Optional[tuple] = None
    w_set: Optional[tuple] = None
    b_phi: Optional[frozenset] = None


_REWRITE_CTX: dict = {}


def _rewrite_context(tkb: TKB, cq_list: tuple) -> RewriteContext:
    key = (tkb, cq_list)
    c = _REWRITE_CTX.get(key)
    if c is None:
        if len(_REWRITE_CTX) > 16:
            _REWRITE_CTX.clear()
        c = _REWRITE_CTX[key] = RewriteContext(tkb, cq_list)
    return c


def rewriting_satisfiable(phi: TCQ, tkb: TKB) -> RewriteVerdict:
    """Decide satisfiability via the rewriting path; raises NotSeparated when
    the propositional abstraction mixes future under past or vice versa."""
    tkb = validate_tkb(tkb)
    phi_n = normalize_tcq(phi)
    pa, cq_list = propositional_abstraction(phi_n)
    cq_list = tuple(cq_list)
    m = len(cq_list)
    decomp = ltl.decompose_separated(pa, m)
    ctx = _rewrite_context(tkb, cq_list)
    n = tkb.n

    b_phi_cands: list[ConceptAssertion] = []
    for a in sorted(ctx.phi_inds):
        for b in ctx.rigid_basics:
            b_phi_cands.append(ConceptAssertion(b, a))
        for s in ctx.flex_roles:
            b_phi_cands.append(ConceptAssertion(Exists(Role(s)), a))
    b_phi_cands = sorted(set(b_phi_cands), key=str)

    all_leaves = frozenset(range(1, m + 1))
    all_worlds = [frozenset(c) for c in _powerset(sorted(all_leaves))]
    seen_equiv: set = set()
    for u_set in map(frozenset, _powerset(sorted(all_leaves))):
        rigcons_u = ctx.rigcons(u_set)
        for v_set in map(frozenset, _powerset(sorted(all_leaves))):
            worlds = [w for w in all_worlds
                      if w <= u_set and (all_leaves - w) <= v_set]
            if not worlds:
                continue
            if frozenset().union(*worlds) != u_set:
                continue
            if frozenset().union(*((all_leaves - w) for w in worlds)) != v_set:
                continue
            if rigcons_u is None:
                continue
            for k in range(len(b_phi_cands) + 1):
                for combo in itertools.combinations(b_phi_cands, k):
                    b_phi = frozenset(combo)
                    # candidates sharing the rigid fixpoint and the flexible
                    # guess produce equivalent rewritings; try each class once
                    skel = ctx.skeleton(u_set, b_phi, v_set)
                    if skel is None:
                        continue
                    ekey = (u_set, v_set, skel.a_r_prime, skel.rf_phi)
                    if ekey in seen_equiv:
                        continue
                    seen_equiv.add(ekey)
                    res = _try_candidate(ctx, decomp, u_set, v_set,
                                         b_phi, worlds, n)
                    if res is not None:
                        return res
    return RewriteVerdict(False)


def _try_candidate(ctx: RewriteContext, decomp, u_set, v_set, b_phi,
                   candidate_worlds, n) -> Optional[RewriteVerdict]:
    skel = ctx.skeleton(u_set, b_phi, v_set)
    if skel is None:
        return None
    w_set = [w for w in candidate_worlds if ctx.rsat_holds(skel, w, -1)]
    if not w_set:
        return None
    all_leaves = frozenset(range(1, len(ctx.cq_list) + 1))
    if frozenset().union(*w_set) != u_set:
        return None
    if frozenset().union(*((all_leaves - w) for w in w_set)) != v_set:
        return None

    flex_cands = [(s, a) for s in ctx.flex_roles for a in sorted(ctx.phi_inds)]
    b_phi_flex = frozenset((a.concept.role.name, a.individual)
                           for a in b_phi if isinstance(a.concept, Exists)
                           and a.concept.role.name in ctx.sig.flexible_roles())
    admissible: dict = {}
    entailed: dict = {}
    for i in range(n + 1):
        ok_ws = []
        for w in w_set:
            if not ctx.rsat_holds(skel, w, i):
                continue
            ent = frozenset(c for c in flex_cands
                            if ctx.exists_entailed(skel, w, c[0], c[1], i))
            if not ent <= b_phi_flex:
                continue
            entailed[(w, i)] = ent
            ok_ws.append(w)
        if not ok_ws:
            return None
        admissible[i] = ok_ws

    for v in decomp.valuations:
        fut_ok = ltl.atmfut(w_set, v, decomp)
        seq = _past_type_search(decomp, v, admissible, entailed,
                                b_phi_flex, fut_ok, n)
        if seq is not None:
            return RewriteVerdict(True, tuple(seq), tuple(w_set), b_phi)
    return None


def _past_type_search(decomp, v, admissible, entailed, b_phi_flex,
                      fut_ok, n) -> Optional[list]:
    """Types T_0..T_n with admissible worlds, jointly covering the guessed
    flexible assertions, whose last type carries the induced past set and a
    future-startable world."""
    pv = decomp.past_set(v)
    ts = ltl.type_system(list(decomp.top_past)
                         + [ltl.LProp(i) for i in range(1, decomp.prop_count + 1)])
    targets = tuple(sorted(b_phi_flex))
    full = (1 << len(targets)) - 1

    def cover_mask(w, i):
        got = entailed.get((w, i), frozenset())
        return sum(1 << k for k, c in enumerate(targets) if c in got)

    layers: list[dict] = []
    layer: dict = {}
    for t in ts.types():
        w = ts.world_of(t)
        if not ts.is_initial(t) or w not in admissible[0]:
            continue
        if n == 0 and not (pv <= t and w in fut_ok):
            continue
        layer.setdefault((t, cover_mask(w, 0)), None)
    layers.append(dict(layer))
    for i in range(1, n + 1):
        nxt: dict = {}
        for (t, cov) in layer:
            for u in ts.types():
                w = ts.world_of(u)
                if w not in admissible[i] or not ts.t_compatible(t, u):
                    continue
                if i == n and not (pv <= u and w in fut_ok):
                    continue
                state = (u, cov | cover_mask(w, i))
                if state not in nxt:
                    nxt[state] = (t, cov)
        layer = nxt
        layers.append(dict(layer))
        if not layer:
            return None
    final = next((s for s in layer if s[1] == full), None)
    if final is None:
        return None
    seq = [final]
    for i in range(n, 0, -1):
        seq.append(layers[i][seq[-1]])
    seq.reverse()
    return [ts.world_of(t) for (t, _) in seq]


def _powerset(items):
    items = list(items)
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


# ---------------------------------------------------------------------------
# S-expression and SQL-flavoured printers (documentation aids for the CLI)
# ---------------------------------------------------------------------------


def to_sexpr(f: FOFormula) -> str:
    if isinstance(f, FTrue):
        return "true"
    if isinstance(f, FFalse):
        return "false"
    if isinstance(f, FAtom):
        ts = " ".join(_term_str(t) for t in f.terms)
        return f"({f.kind} {f.symbol} {ts} {_term_str(f.time)})"
    if isinstance(f, FEq):
        return f"(= {_term_str(f.left)} {_term_str(f.right)})"
    if isinstance(f, FNot):
        return f"(not {to_sexpr(f.arg)})"
    if isinstance(f, FAnd):
        return "(and " + " ".join(to_sexpr(a) for a in f.args) + ")"
    if isinstance(f, FOr):
        return "(or " + " ".join(to_sexpr(a) for a in f.args) + ")"
    if isinstance(f, FExistsObj):
        return f"(exists-obj ?{f.var} {to_sexpr(f.body)})"
    if isinstance(f, FExistsTime):
        return f"(exists-time ?{f.var} {to_sexpr(f.body)})"
    raise TypeError(f)


def _term_str(t: FTerm) -> str:
    if isinstance(t, (OVar, TVar)):
        return f"?{t.name}"
    if isinstance(t, OConst):
        return t.name
    return str(t.value)


def to_sqlish(f: FOFormula, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(f, FTrue):
        return pad + "TRUE"
    if isinstance(f, FFalse):
        return pad + "FALSE"
    if isinstance(f, FAtom):
        ts = ", ".join(_term_str(t) for t in f.terms)
        neg = "NOT_" if f.kind.startswith("neg") else ""
        return f"{pad}{neg}{f.symbol}({ts} AT {_term_str(f.time)})"
    if isinstance(f, FEq):
        return f"{pad}{_term_str(f.left)} = {_term_str(f.right)}"
    if isinstance(f, FNot):
        return pad + "NOT (\n" + to_sqlish(f.arg, indent + 1) + "\n" + pad + ")"
    if isinstance(f, FAnd):
        sep = "\n" + pad + "AND\n"
        return sep.join(to_sqlish(a, indent + 1) for a in f.args)
    if isinstance(f, FOr):
        sep = "\n" + pad + "OR\n"
        return sep.join(to_sqlish(a, indent + 1) for a in f.args)
    if isinstance(f, FExistsObj):
        return (pad + f"EXISTS (SELECT ?{f.var} FROM objects WHERE\n"
                + to_sqlish(f.body, indent + 1) + "\n" + pad + ")")
    if isinstance(f, FExistsTime):
        return (pad + f"EXISTS (SELECT ?{f.var} FROM timepoints WHERE\n"
                + to_sqlish(f.body, indent + 1) + "\n" + pad + ")")
    raise TypeError(f)
