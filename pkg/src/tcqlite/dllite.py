"""Atemporal reasoning for horn DL-Lite with role hierarchies.

Two independent decision paths live here: a canonical-model chase
(consistency, CQ entailment, certain answers) and a backward-chaining query
rewriting evaluated over the closed-world reading of an ABox.  The test suite
holds them against each other and against the brute-force oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .errors import FragmentViolation, InconsistentKB, ResourceLimit
from .model import (
    ABox, Atom, Atomic, BasicConcept, CQ, ConceptAssertion, ConceptAtom,
    ConceptInclusion, Exists, Ind, KB, Ontology, Role, RoleAssertion,
    RoleAtom, Term, Var, atom_sort_key, atom_terms, cq_canonical_key,
)

# ---------------------------------------------------------------------------
# Ontology closures
# ---------------------------------------------------------------------------


class OntologyContext:
    """Precomputed closures for one ontology: role hierarchy, horn CI index,
    saturation of basic-concept sets, and the unsatisfiable-concept fixpoint.
    """

    def __init__(self, o: Ontology):
        self.ontology = o
        for c in o.cis:
            if not c.is_horn():
                raise FragmentViolation(f"non-horn CI: {c}")
        self.horn_cis: list[tuple[frozenset, Optional[BasicConcept]]] = [
            (c.lhs, c.rhs[0] if c.rhs else None) for c in o.cis]
        self.bottom_lhs = [c.lhs for c in o.cis if c.is_bottom()]
        self._super: dict[Role, frozenset[Role]] = self._role_closure(o)
        self._sat_cache: dict[frozenset, frozenset] = {}
        self._bad_roles = self._compute_bad_roles()

    @staticmethod
    def _role_closure(o: Ontology) -> dict[Role, frozenset[Role]]:
        roles: set[Role] = set()
        for ri in o.ris:
            roles |= {ri.sub, ri.sub.inverse(), ri.sup, ri.sup.inverse()}
        for c in o.cis:
            for b in c.lhs | set(c.rhs):
                if isinstance(b, Exists):
                    roles |= {b.role, b.role.inverse()}
        edges: dict[Role, set[Role]] = {r: {r} for r in roles}
        for ri in o.ris:
            edges.setdefault(ri.sub, {ri.sub}).add(ri.sup)
            edges.setdefault(ri.sub.inverse(), {ri.sub.inverse()}).add(ri.sup.inverse())
            edges.setdefault(ri.sup, {ri.sup})
            edges.setdefault(ri.sup.inverse(), {ri.sup.inverse()})
        changed = True
        while changed:
            changed = False
            for r, sup in edges.items():
                new = set()
                for s in sup:
                    new |= edges.get(s, {s})
                if not new <= sup:
                    sup |= new
                    changed = True
        return {r: frozenset(s) for r, s in edges.items()}

    def superroles(self, r: Role) -> frozenset[Role]:
        return self._super.get(r, frozenset({r}))

    def role_entails(self, s: Role, r: Role) -> bool:
        return r == s or r in self.superroles(s)

    def subroles(self, r: Role) -> frozenset[Role]:
        return frozenset(s for s in self._super if r in self._super[s]) | {r}

    def saturate(self, basics: Iterable[BasicConcept]) -> frozenset:
        """All basic concepts an element satisfying `basics` must satisfy."""
        key = frozenset(basics)
        hit = self._sat_cache.get(key)
        if hit is not None:
            return hit
        t = set(key)
        changed = True
        while changed:
            changed = False
            for b in list(t):
                if isinstance(b, Exists):
                    for s in self.superroles(b.role):
                        if Exists(s) not in t:
                            t.add(Exists(s))
                            changed = True
            for lhs, rhs in self.horn_cis:
                if rhs is not None and rhs not in t and lhs <= t:
                    t.add(rhs)
                    changed = True
        out = frozenset(t)
        self._sat_cache[key] = out
        return out

    def _fires_bottom(self, t: frozenset) -> bool:
        return any(lhs <= t for lhs in self.bottom_lhs)

    def _compute_bad_roles(self) -> frozenset[Role]:
        """Roles r whose generated successor (type {∃r⁻}) cannot exist."""
        all_roles = set(self._super)
        bad: set[Role] = set()
        changed = True
        while changed:
            changed = False
            for r in all_roles - bad:
                t = self.saturate({Exists(r.inverse())})
                if self._fires_bottom(t) or any(
                        isinstance(b, Exists) and b.role in bad for b in t):
                    bad.add(r)
                    changed = True
        return frozenset(bad)

    def type_inconsistent(self, t: frozenset) -> bool:
        """True iff no model can give an element exactly this saturated type."""
        return self._fires_bottom(t) or any(
            isinstance(b, Exists) and b.role in self._bad_roles for b in t)

    def top_inconsistent(self) -> bool:
        return self.type_inconsistent(self.saturate(()))


_CTX_CACHE: dict[Ontology, OntologyContext] = {}


def ctx(o: Ontology) -> OntologyContext:
    c = _CTX_CACHE.get(o)
    if c is None:
        c = _CTX_CACHE[o] = OntologyContext(o)
    return c


def role_entails(o: Ontology, s: Role, r: Role) -> bool:
    """O ⊨ s ⊑ r via the reflexive-transitive, inversion-closed RI closure."""
    return ctx(o).role_entails(s, r)


def concept_entails(o: Ontology, lhs: Iterable[BasicConcept],
                    b: Optional[BasicConcept]) -> bool:
    """O ⊨ ⊓lhs ⊑ b; b=None asks whether ⊓lhs is unsatisfiable w.r.t. o."""
    c = ctx(o)
    t = c.saturate(lhs)
    if b is None:
        return c.type_inconsistent(t)
    return b in t or c.type_inconsistent(t)


# ---------------------------------------------------------------------------
# Canonical interpretation (chase)
# ---------------------------------------------------------------------------

# An element is an individual name (str) or an unnamed path
# (root individual, tuple of Roles).
Element = Union[str, tuple]

# unnamed-element types are fully determined by (ontology, seed concept set)
_CHASE_TYPE_CACHE: dict = {}


@dataclass
class CanonicalInterpretation:
    """The positive chase of a KB, unnamed part built breadth-first on demand.

    Unlike the saturation shortcut in OntologyContext, the named part is
    derived by literal rule application so the two paths stay independent.
    """

    kb: KB
    octx: OntologyContext
    named: dict = field(default_factory=dict)          # ind -> set[BasicConcept]
    role_pairs: dict = field(default_factory=dict)     # role name -> set[(a, b)]
    unnamed: dict = field(default_factory=dict)        # path -> set[BasicConcept]
    depth_built: int = 0

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, kb: KB, extra_inds: Iterable[str] = ()) -> "CanonicalInterpretation":
        self = cls(kb, ctx(kb.ontology))
        inds = set(kb.individuals()) | set(extra_inds)
        for a in inds:
            self.named[a] = set()
        for assn in kb.abox:
            if isinstance(assn, ConceptAssertion):
                if assn.positive:
                    self.named.setdefault(assn.individual, set()).add(assn.concept)
            else:
                assn = assn.normalized()
                if assn.positive:
                    self._add_pair(assn.role.name, assn.subj, assn.obj)
        self._saturate_named()
        return self

    def _add_pair(self, role_name: str, a: str, b: str):
        for s in self.octx.superroles(Role(role_name)):
            if s.inverted:
                self.role_pairs.setdefault(s.name, set()).add((b, a))
            else:
                self.role_pairs.setdefault(s.name, set()).add((a, b))
        self.named.setdefault(a, set())
        self.named.setdefault(b, set())

    def _saturate_named(self):
        changed = True
        while changed:
            changed = False
            for rname, pairs in self.role_pairs.items():
                for a, b in pairs:
                    if Exists(Role(rname)) not in self.named[a]:
                        self.named[a].add(Exists(Role(rname)))
                        changed = True
                    if Exists(Role(rname, True)) not in self.named[b]:
                        self.named[b].add(Exists(Role(rname, True)))
                        changed = True
            for t in self.named.values():
                for b in list(t):
                    if isinstance(b, Exists):
                        for s in self.octx.superroles(b.role):
                            if Exists(s) not in t:
                                t.add(Exists(s))
                                changed = True
                for lhs, rhs in self.octx.horn_cis:
                    if rhs is not None and rhs not in t and lhs <= t:
                        t.add(rhs)
                        changed = True

    def ensure_depth(self, depth: int):
        """Extend the unnamed tree part breadth-first up to path length depth."""
        while self.depth_built < depth:
            self.depth_built += 1
            frontier: list[tuple[Element, tuple]] = []
            if self.depth_built == 1:
                frontier = [(a, (a, ())) for a in self.named]
            else:
                for path in list(self.unnamed):
                    if len(path[1]) == self.depth_built - 1:
                        frontier.append((path, path))
            for el, path in frontier:
                t = self.named[el] if isinstance(el, str) else self.unnamed[el]
                for b in sorted(t, key=str):
                    if isinstance(b, Exists):
                        child = (path[0], path[1] + (b.role,))
                        if child not in self.unnamed:
                            seed = {Exists(b.role.inverse())}
                            self.unnamed[child] = set(self._saturate_type(seed))

    def _saturate_type(self, seed: set) -> set:
        key = (self.kb.ontology, frozenset(seed))
        hit = _CHASE_TYPE_CACHE.get(key)
        if hit is not None:
            return set(hit)
        t = set(seed)
        changed = True
        while changed:
            changed = False
            for b in list(t):
                if isinstance(b, Exists):
                    for s in self.octx.superroles(b.role):
                        if Exists(s) not in t:
                            t.add(Exists(s))
                            changed = True
            for lhs, rhs in self.octx.horn_cis:
                if rhs is not None and rhs not in t and lhs <= t:
                    t.add(rhs)
                    changed = True
        if len(_CHASE_TYPE_CACHE) > 100_000:
            _CHASE_TYPE_CACHE.clear()
        _CHASE_TYPE_CACHE[key] = frozenset(t)
        return t

    # -- read access --------------------------------------------------------

    def elements(self) -> Iterator[Element]:
        yield from self.named
        yield from self.unnamed

    def types_of(self, el: Element) -> set:
        return self.named[el] if isinstance(el, str) else self.unnamed[el]

    def has_concept(self, el: Element, b: BasicConcept) -> bool:
        return b in self.types_of(el)

    def parent_of(self, el: Element):
        """(parent element, connecting role) for an unnamed element."""
        root, word = el
        if len(word) == 1:
            return root, word[0]
        return (root, word[:-1]), word[-1]

    def _edge_satisfies(self, edge_role: Role, rname: str, forward: bool) -> bool:
        want = Role(rname) if forward else Role(rname, True)
        return want in self.octx.superroles(edge_role)

    def role_successors(self, el: Element, rname: str) -> Iterator[Element]:
        """All y with (el, y) in the extension of role name rname."""
        if isinstance(el, str):
            for a, b in self.role_pairs.get(rname, ()):
                if a == el:
                    yield b
        else:
            parent, via = self.parent_of(el)
            if self._edge_satisfies(via, rname, forward=False):
                yield parent
        for child, _ in self._children(el):
            via = child[1][-1]
            if self._edge_satisfies(via, rname, forward=True):
                yield child

    def role_predecessors(self, el: Element, rname: str) -> Iterator[Element]:
        if isinstance(el, str):
            for a, b in self.role_pairs.get(rname, ()):
                if b == el:
                    yield a
        else:
            parent, via = self.parent_of(el)
            if self._edge_satisfies(via, rname, forward=True):
                yield parent
        for child, _ in self._children(el):
            via = child[1][-1]
            if self._edge_satisfies(via, rname, forward=False):
                yield child

    def _children(self, el: Element):
        root = el if isinstance(el, str) else el[0]
        word = () if isinstance(el, str) else el[1]
        if len(word) >= self.depth_built:
            return
        t = self.types_of(el)
        for b in t:
            if isinstance(b, Exists):
                child = (root, word + (b.role,))
                if child in self.unnamed:
                    yield child, b.role

    def has_role(self, a: Element, b: Element, rname: str) -> bool:
        return any(x == b for x in self.role_successors(a, rname))


def canonical_model(kb: KB, depth: int = 0,
                    extra_inds: Iterable[str] = ()) -> CanonicalInterpretation:
    m = CanonicalInterpretation.build(kb, extra_inds)
    m.ensure_depth(depth)
    return m


_CANON_CACHE: dict = {}
_CANON_CACHE_CAP = 4096


def _canonical(kb: KB, extra_inds: frozenset = frozenset()) -> CanonicalInterpretation:
    key = (kb.ontology, kb.abox, extra_inds)
    m = _CANON_CACHE.get(key)
    if m is None:
        if len(_CANON_CACHE) >= _CANON_CACHE_CAP:
            _CANON_CACHE.clear()
        m = _CANON_CACHE[key] = CanonicalInterpretation.build(kb, extra_inds)
    return m


# ---------------------------------------------------------------------------
# Consistency and CQ entailment
# ---------------------------------------------------------------------------


def is_consistent(kb: KB) -> bool:
    """Check ⊥-CIs and negative assertions against the canonical model.

    The unnamed part is checked symbolically: a generated successor violates
    a ⊥-CI iff concept_entails marks its seed concept unsatisfiable.
    """
    c = ctx(kb.ontology)
    if c.top_inconsistent():
        # interpretation domains are nonempty, so ⊤ ⊑ ⊥ has no model at all
        return False
    m = _canonical(kb)
    for el in m.named:
        t = frozenset(m.types_of(el))
        if c._fires_bottom(t):
            return False
        for b in t:
            if isinstance(b, Exists) and concept_entails(
                    kb.ontology, {Exists(b.role.inverse())}, None):
                return False
    for assn in kb.abox:
        if isinstance(assn, ConceptAssertion):
            if not assn.positive and assn.concept in m.types_of(assn.individual):
                return False
        else:
            a = assn.normalized()
            if not a.positive and (a.subj, a.obj) in m.role_pairs.get(a.role.name, set()):
                return False
    return True


def _hom_search(m: CanonicalInterpretation, q: CQ) -> bool:
    """Backtracking homomorphism search for a Boolean CQ into the chase."""
    if not q.atoms:
        return True
    # order atoms so each one shares a term with an earlier atom where possible
    ordered: list[Atom] = []
    seen_terms: set[Term] = set()
    pool = sorted(q.atoms, key=lambda a: (-sum(isinstance(t, Ind)
                                               for t in atom_terms(a)), str(a)))
    while pool:
        pick = next((a for a in pool if seen_terms & set(atom_terms(a))
                     or any(isinstance(t, Ind) for t in atom_terms(a))), pool[0])
        pool.remove(pick)
        ordered.append(pick)
        seen_terms |= set(atom_terms(pick))

    assign: dict[str, Element] = {}

    def lookup(t: Term):
        if isinstance(t, Ind):
            return t.name if t.name in m.named else False
        return assign.get(t.name)

    def bind_and_go(i: int, t: Term, el: Element) -> bool:
        if isinstance(t, Ind):
            return t.name == el and match(i)
        if t.name in assign:
            return assign[t.name] == el and match(i)
        assign[t.name] = el
        if match(i):
            return True
        del assign[t.name]
        return False

    def match(i: int) -> bool:
        if i == len(ordered):
            return True
        a = ordered[i]
        if isinstance(a, ConceptAtom):
            v = lookup(a.term)
            if v is False:
                return False
            if v is not None:
                return m.has_concept(v, a.concept) and match(i + 1)
            for el in list(m.elements()):
                if m.has_concept(el, a.concept) and bind_and_go(i + 1, a.term, el):
                    return True
            return False
        sv, ov = lookup(a.subj), lookup(a.obj)
        if sv is False or ov is False:
            return False
        if sv is not None:
            for o in m.role_successors(sv, a.role.name):
                if ov is not None and o != ov:
                    continue
                if bind_and_go(i + 1, a.obj, o):
                    return True
            return False
        if ov is not None:
            for s in m.role_predecessors(ov, a.role.name):
                if bind_and_go(i + 1, a.subj, s):
                    return True
            return False
        for s in list(m.elements()):
            for o in m.role_successors(s, a.role.name):
                if a.subj == a.obj and s != o:
                    continue
                if isinstance(a.subj, Var):
                    assign[a.subj.name] = s
                    if bind_and_go(i + 1, a.obj, o):
                        return True
                    del assign[a.subj.name]
        return False

    return match(0)


_ENTAIL_CACHE: dict = {}
_ENTAIL_CACHE_CAP = 200_000


def cq_entailed(kb: KB, q: CQ, on_inconsistent: str = "true") -> bool:
    """KB ⊨ q for Boolean q, by homomorphism into the canonical model.

    on_inconsistent selects the behaviour on inconsistent KBs: "true" follows
    classical semantics, "raise" raises InconsistentKB.
    """
    if q.free_vars:
        raise ValueError("cq_entailed expects a Boolean CQ")
    key = (kb.ontology, kb.abox, cq_canonical_key(q), frozenset(q.individuals()))
    hit = _ENTAIL_CACHE.get(key)
    if hit is None:
        if len(_ENTAIL_CACHE) >= _ENTAIL_CACHE_CAP:
            _ENTAIL_CACHE.clear()
        hit = _cq_entailed_raw(kb, q)
        _ENTAIL_CACHE[key] = hit
    if hit == "inconsistent":
        if on_inconsistent == "raise":
            raise InconsistentKB(kb)
        return True
    return hit


def _cq_entailed_raw(kb: KB, q: CQ):
    if not is_consistent(kb):
        return "inconsistent"
    extra = frozenset(q.individuals()) - kb.individuals()
    if not extra and not kb.individuals():
        # interpretation domains are nonempty; reason over one generic element
        extra = frozenset({"@any"})
    m = _canonical(kb, extra)
    m.ensure_depth(max(1, len(q.terms())))
    return bool(_hom_search(m, q))


def ucq_entailed(kb: KB, qs: Iterable[CQ], on_inconsistent: str = "true") -> bool:
    return any(cq_entailed(kb, q, on_inconsistent) for q in qs)


def certain_answers(kb: KB, q: CQ) -> set:
    """All groundings of q's free variables into kb's individuals entailed by kb."""
    inds = sorted(kb.individuals())
    out = set()
    for combo in itertools.product(inds, repeat=len(q.free_vars)):
        g = dict(zip(q.free_vars, combo))
        if cq_entailed(kb, q.ground(g)):
            out.add(tuple(sorted(g.items())))
    return out


# ---------------------------------------------------------------------------
# Closed-world (database) evaluation of (U)CQs over a single ABox
# ---------------------------------------------------------------------------


def _db_facts(a: ABox):
    concepts: dict[BasicConcept, set[str]] = {}
    roles: dict[str, set[tuple[str, str]]] = {}
    inds: set[str] = set()
    for assn in a:
        if isinstance(assn, ConceptAssertion):
            inds.add(assn.individual)
            if assn.positive:
                concepts.setdefault(assn.concept, set()).add(assn.individual)
        else:
            assn = assn.normalized()
            inds |= {assn.subj, assn.obj}
            if assn.positive:
                roles.setdefault(assn.role.name, set()).add((assn.subj, assn.obj))
    return concepts, roles, inds


def eval_cq_db(a: ABox, q: CQ, grounding: Optional[dict] = None) -> bool:
    """Evaluate a CQ over the closed-world reading of a single ABox."""
    concepts, roles, _ = _db_facts(a)
    g: dict[str, str] = dict(grounding or {})

    def resolve(t: Term):
        return t.name if isinstance(t, Ind) else g.get(t.name)

    def bind_and_go(i: int, t: Term, val: str) -> bool:
        cur = resolve(t)
        if cur is not None:
            return cur == val and match(i)
        g[t.name] = val
        if match(i):
            return True
        del g[t.name]
        return False

    atoms = sorted(q.atoms, key=str)

    def match(i: int) -> bool:
        if i == len(atoms):
            return True
        at = atoms[i]
        if isinstance(at, ConceptAtom):
            pool = concepts.get(at.concept, set())
            val = resolve(at.term)
            if val is not None:
                return val in pool and match(i + 1)
            return any(bind_and_go(i + 1, at.term, c) for c in sorted(pool))
        for (s, o) in sorted(roles.get(at.role.name, set())):
            sv = resolve(at.subj)
            if sv is not None and s != sv:
                continue
            if sv is None:
                g[at.subj.name] = s
                ok = bind_and_go(i + 1, at.obj, o)
                del g[at.subj.name]
            else:
                ok = bind_and_go(i + 1, at.obj, o)
            if ok:
                return True
        return False

    return match(0)


def eval_ucq_db(a: ABox, qs: Iterable[CQ], grounding: Optional[dict] = None) -> bool:
    return any(eval_cq_db(a, q, grounding) for q in qs)


# ---------------------------------------------------------------------------
# Query rewriting (PerfectRef-style backward chaining)
# ---------------------------------------------------------------------------


def _fresh_var(counter) -> Var:
    return Var(f"_u{next(counter)}")


def _replace_atom(q: CQ, old: Atom, new_atoms: Iterable[Atom]) -> CQ:
    return CQ(frozenset(set(q.atoms) - {old}) | frozenset(new_atoms), q.free_vars)


def _occurrences(q: CQ, name: str) -> int:
    return sum(1 for a in q.atoms for t in atom_terms(a)
               if isinstance(t, Var) and t.name == name)


def _drop_redundant_atoms(q: CQ) -> CQ:
    """Remove atoms implied by another atom of the same query.

    A term is loose when it is a quantified variable occurring exactly once
    in the whole query; an atom whose non-matching positions are all loose is
    subsumed by any same-symbol atom (map the loose variable onto the other
    atom's term), so dropping it preserves equivalence.  Keeps the rewriting
    saturation finite: unfolding would otherwise pile up parallel atoms with
    fresh variables without bound.
    """
    counts: dict[str, int] = {}
    for a in q.atoms:
        for t in atom_terms(a):
            if isinstance(t, Var):
                counts[t.name] = counts.get(t.name, 0) + 1

    def loose(t: Term) -> bool:
        return (isinstance(t, Var) and t.name not in q.free_vars
                and counts.get(t.name, 0) == 1)

    ordered = sorted(q.atoms, key=atom_sort_key)
    kept: list[Atom] = []
    dropped: set = set()
    for a in ordered:
        redundant = False
        for b in ordered:
            if a == b or b in dropped:
                continue
            if isinstance(a, ConceptAtom) and isinstance(b, ConceptAtom):
                if a.concept == b.concept and loose(a.term):
                    redundant = True
            elif isinstance(a, ConceptAtom) and isinstance(b, RoleAtom) \
                    and isinstance(a.concept, Exists):
                r = a.concept.role
                anchor = b.subj if not r.inverted else b.obj
                if r.name == b.role.name and (a.term == anchor
                                              or loose(a.term)):
                    redundant = True
            elif isinstance(a, RoleAtom) and isinstance(b, RoleAtom):
                if a.role.name == b.role.name:
                    s_ok = a.subj == b.subj or loose(a.subj)
                    t_ok = a.obj == b.obj or loose(a.obj)
                    if s_ok and t_ok and (loose(a.subj) or loose(a.obj)):
                        redundant = True
            if redundant:
                break
        if redundant:
            dropped.add(a)
        else:
            kept.append(a)
    if not dropped:
        return q
    return CQ(frozenset(kept), q.free_vars)


def _subsumes(q1: CQ, q2: CQ) -> bool:
    """Is there a homomorphism of q1 into q2 fixing individuals and free
    variables?  Then q2 is redundant next to q1 in a union."""
    if set(q1.free_vars) != set(q2.free_vars):
        return False
    atoms1 = sorted(q1.atoms, key=atom_sort_key)
    atoms2 = list(q2.atoms)

    def tmatch(t1, t2, env):
        if isinstance(t1, Ind):
            return t1 == t2
        if t1.name in q1.free_vars:
            return isinstance(t2, Var) and t2.name == t1.name
        if t1.name in env:
            return env[t1.name] == t2
        env[t1.name] = t2
        return True

    def go(i: int, env: dict) -> bool:
        if i == len(atoms1):
            return True
        a = atoms1[i]
        for b in atoms2:
            saved = dict(env)
            if isinstance(a, ConceptAtom) and isinstance(b, ConceptAtom):
                if a.concept == b.concept and tmatch(a.term, b.term, env) \
                        and go(i + 1, env):
                    return True
            elif isinstance(a, RoleAtom) and isinstance(b, RoleAtom):
                if a.role == b.role and tmatch(a.subj, b.subj, env) \
                        and tmatch(a.obj, b.obj, env) and go(i + 1, env):
                    return True
            env.clear()
            env.update(saved)
        return False

    return go(0, {})


_REF_CACHE: dict = {}


def perfect_ref(q: Union[CQ, Iterable[CQ]], o: Ontology) -> list[CQ]:
    """Rewrite a (U)CQ into a UCQ whose closed-world evaluation over any ABox
    coincides with certain-answer entailment over ⟨o, ABox⟩.

    Backward chaining: RHS-matching CIs replace an atom by their LHS on the
    same term; role atoms rewrite along the RI closure; an unshared
    existential variable in a role atom reduces it to an unqualified
    existential atom, which in turn may unfold to a fresh role atom.
    Saturation runs to fixpoint modulo isomorphism; a query subsumed by an
    already-generated one is dropped (its descendants stay subsumed by the
    keeper's descendants, so the union is unchanged and saturation stays
    finite under conjunctive left-hand sides).
    """
    c = ctx(o)
    seeds = [q] if isinstance(q, CQ) else list(q)
    cache_key = (o, tuple(sorted(
        (cq_canonical_key(s), tuple(sorted(s.individuals())), s.free_vars)
        for s in seeds)))
    hit = _REF_CACHE.get(cache_key)
    if hit is not None:
        return list(hit)
    counter = itertools.count()
    seen: dict = {}
    work: list[CQ] = []

    def push(cq: CQ):
        cq = _drop_redundant_atoms(cq)
        key = cq_canonical_key(cq)
        if key in seen:
            return
        if any(old is not None and _subsumes(old, cq)
               for old in seen.values()):
            seen[key] = None
            return
        if len(seen) > 50_000:
            raise ResourceLimit("query rewriting saturation cap")
        seen[key] = cq
        work.append(cq)

    for s in seeds:
        push(CQ(s.atoms, s.free_vars))

    while work:
        cur = work.pop()
        for a in cur.atoms:
            if isinstance(a, ConceptAtom):
                # CI steps (declared CIs whose RHS is this concept)
                for lhs, rhs in c.horn_cis:
                    if rhs == a.concept:
                        push(_replace_atom(cur, a, (ConceptAtom(b, a.term) for b in lhs)))
                if isinstance(a.concept, Exists):
                    r = a.concept.role
                    # RI-induced CIs  ∃s ⊑ ∃r
                    for s in c.subroles(r):
                        if s != r:
                            push(_replace_atom(cur, a, [ConceptAtom(Exists(s), a.term)]))
                    # unfold to a role atom with a fresh unshared variable
                    y = _fresh_var(counter)
                    if r.inverted:
                        push(_replace_atom(cur, a, [RoleAtom(Role(r.name), y, a.term)]))
                    else:
                        push(_replace_atom(cur, a, [RoleAtom(Role(r.name), a.term, y)]))
            else:
                # RI steps
                for s in c.subroles(Role(a.role.name)):
                    if s != Role(a.role.name):
                        push(_replace_atom(cur, a, [RoleAtom(s, a.subj, a.obj)]))
                # reduction of unshared existential variables
                subj, obj = a.subj, a.obj
                if (isinstance(obj, Var) and obj.name not in cur.free_vars
                        and obj != subj and _occurrences(cur, obj.name) == 1):
                    push(_replace_atom(
                        cur, a, [ConceptAtom(Exists(Role(a.role.name)), subj)]))
                if (isinstance(subj, Var) and subj.name not in cur.free_vars
                        and subj != obj and _occurrences(cur, subj.name) == 1):
                    push(_replace_atom(
                        cur, a, [ConceptAtom(Exists(Role(a.role.name, True)), obj)]))

    out = sorted((v for v in seen.values() if v is not None),
                 key=cq_canonical_key)
    if len(_REF_CACHE) > 50_000:
        _REF_CACHE.clear()
    _REF_CACHE[cache_key] = tuple(out)
    return out


@dataclass(frozen=True)
class QUnsat:
    """FO rewriting of KB inconsistency, split by the source of the clash.

    bottom_ucq matches a derived ⊥-CI violation in the positive part;
    neg_concept/neg_role pair an asserted negative with the rewriting of its
    positive counterpart; always covers ontologies entailing ⊤ ⊑ ⊥.
    """

    always: bool
    bottom_ucq: tuple  # tuple[CQ, ...]
    neg_concept: tuple  # tuple[(BasicConcept, tuple[CQ, ...]), ...]
    neg_role: tuple    # tuple[(str role name, tuple[CQ, ...]), ...]

    def eval_db(self, a: ABox) -> bool:
        if self.always:
            return True
        if eval_ucq_db(a, self.bottom_ucq):
            return True
        for assn in a:
            if isinstance(assn, ConceptAssertion) and not assn.positive:
                for b, ucq in self.neg_concept:
                    if b == assn.concept and eval_ucq_db(
                            a, (q.ground({"x": assn.individual}) for q in ucq)):
                        return True
            elif isinstance(assn, RoleAssertion) and not assn.positive:
                na = assn.normalized()
                for rname, ucq in self.neg_role:
                    if rname == na.role.name and eval_ucq_db(
                            a, (q.ground({"x": na.subj, "y": na.obj}) for q in ucq)):
                        return True
        return False


def _abox_vocabulary(o: Ontology, sig_concepts=(), sig_roles=()):
    concepts = set(o.concept_names()) | set(sig_concepts)
    roles = set(o.role_names()) | set(sig_roles)
    basics: list[BasicConcept] = [Atomic(a) for a in sorted(concepts)]
    for r in sorted(roles):
        basics += [Exists(Role(r)), Exists(Role(r, True))]
    return basics, sorted(roles)


def q_unsat(o: Ontology, sig_concepts=(), sig_roles=()) -> QUnsat:
    """Inconsistency rewriting: ⟨o, A⟩ is inconsistent iff eval_db(A) is true.

    Negated basic-concept and role assertions are matched through dedicated
    pattern families since the closed-world store keeps positives only.
    """
    c = ctx(o)
    if c.top_inconsistent():
        return QUnsat(True, (), (), ())
    bottoms: list[CQ] = []
    for lhs in c.bottom_lhs:
        x = Var("x")
        bottoms.extend(perfect_ref(CQ(frozenset(ConceptAtom(b, x) for b in lhs)), o))
    basics, roles = _abox_vocabulary(o, sig_concepts, sig_roles)
    neg_c = []
    for b in basics:
        ucq = perfect_ref(CQ(frozenset({ConceptAtom(b, Var("x"))}), ("x",)), o)
        neg_c.append((b, tuple(ucq)))
    neg_r = []
    for rname in roles:
        ucq = perfect_ref(
            CQ(frozenset({RoleAtom(Role(rname), Var("x"), Var("y"))}), ("x", "y")), o)
        neg_r.append((rname, tuple(ucq)))
    return QUnsat(False, tuple(bottoms), tuple(neg_c), tuple(neg_r))
