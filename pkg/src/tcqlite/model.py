"""Core data model: signatures, ontologies, ABox sequences, CQs and temporal queries.

Everything here is immutable after construction and safe to share between
threads.  The reasoning modules never mutate model values; they build new ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import EmptySequence, FragmentViolation, UnknownName

# ---------------------------------------------------------------------------
# Roles and basic concepts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Role:
    name: str
    inverted: bool = False

    def inverse(self) -> "Role":
        # (P-)- is P again
        return Role(self.name, not self.inverted)

    def __str__(self) -> str:
        return self.name + ("-" if self.inverted else "")


@dataclass(frozen=True, order=True)
class Atomic:
    """A concept name used as a basic concept."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Exists:
    """An unqualified existential restriction over a (possibly inverted) role."""

    role: Role

    def __str__(self) -> str:
        return f"exists {self.role}"


BasicConcept = Union[Atomic, Exists]


def concept_names_of(b: BasicConcept) -> set[str]:
    return {b.name} if isinstance(b, Atomic) else set()


def role_names_of(b: BasicConcept) -> set[str]:
    return {b.role.name} if isinstance(b, Exists) else set()


# ---------------------------------------------------------------------------
# Axioms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConceptInclusion:
    """lhs1 ⊓ ... ⊓ lhsm ⊑ rhs1 ⊔ ... ⊔ rhsn.

    Empty lhs is ⊤, empty rhs is ⊥.  The horn reasoners only accept n <= 1;
    larger rhs tuples occur in bool2krom output ontologies.
    """

    lhs: frozenset[BasicConcept]
    rhs: tuple[BasicConcept, ...]

    def is_horn(self) -> bool:
        return len(self.rhs) <= 1

    def is_krom(self) -> bool:
        return len(self.lhs) + len(self.rhs) <= 2

    def is_bottom(self) -> bool:
        return len(self.rhs) == 0


def ci(lhs: Iterable[BasicConcept], rhs) -> ConceptInclusion:
    """Convenience constructor; rhs may be a BasicConcept, None (= ⊥) or a tuple."""
    if rhs is None:
        rhs_t: tuple[BasicConcept, ...] = ()
    elif isinstance(rhs, tuple):
        rhs_t = rhs
    else:
        rhs_t = (rhs,)
    return ConceptInclusion(frozenset(lhs), rhs_t)


@dataclass(frozen=True, order=True)
class RoleInclusion:
    sub: Role
    sup: Role


@dataclass(frozen=True, order=True)
class ConceptAssertion:
    concept: BasicConcept
    individual: str
    positive: bool = True

    def negated(self) -> "ConceptAssertion":
        return ConceptAssertion(self.concept, self.individual, not self.positive)


@dataclass(frozen=True, order=True)
class RoleAssertion:
    role: Role
    subj: str
    obj: str
    positive: bool = True

    def normalized(self) -> "RoleAssertion":
        """Rewrite P-(a,b) as P(b,a) so stored role assertions use role names."""
        if self.role.inverted:
            return RoleAssertion(Role(self.role.name), self.obj, self.subj, self.positive)
        return self

    def negated(self) -> "RoleAssertion":
        return RoleAssertion(self.role, self.subj, self.obj, not self.positive)


Assertion = Union[ConceptAssertion, RoleAssertion]


def is_rigid_concept(b: BasicConcept, sig: "Signature") -> bool:
    if isinstance(b, Atomic):
        return b.name in sig.rigid_concepts
    return b.role.name in sig.rigid_roles


def is_rigid_assertion(a: Assertion, sig: "Signature") -> bool:
    if isinstance(a, ConceptAssertion):
        return is_rigid_concept(a.concept, sig)
    return a.role.name in sig.rigid_roles


# ---------------------------------------------------------------------------
# Signature, ontology, knowledge bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    concept_names: frozenset[str] = frozenset()
    role_names: frozenset[str] = frozenset()
    individual_names: frozenset[str] = frozenset()
    rigid_concepts: frozenset[str] = frozenset()
    rigid_roles: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.rigid_concepts <= self.concept_names:
            raise UnknownName("rigid concept not among concept names")
        if not self.rigid_roles <= self.role_names:
            raise UnknownName("rigid role not among role names")
        if (self.concept_names & self.role_names
                or self.concept_names & self.individual_names
                or self.role_names & self.individual_names):
            raise UnknownName("concept, role and individual names must be disjoint")

    def merged(self, other: "Signature") -> "Signature":
        return Signature(
            self.concept_names | other.concept_names,
            self.role_names | other.role_names,
            self.individual_names | other.individual_names,
            self.rigid_concepts | other.rigid_concepts,
            self.rigid_roles | other.rigid_roles,
        )

    def flexible_roles(self) -> frozenset[str]:
        return self.role_names - self.rigid_roles


@dataclass(frozen=True)
class Ontology:
    cis: frozenset[ConceptInclusion] = frozenset()
    ris: frozenset[RoleInclusion] = frozenset()

    def concept_names(self) -> set[str]:
        out: set[str] = set()
        for c in self.cis:
            for b in c.lhs | set(c.rhs):
                out |= concept_names_of(b)
        return out

    def role_names(self) -> set[str]:
        out: set[str] = set()
        for c in self.cis:
            for b in c.lhs | set(c.rhs):
                out |= role_names_of(b)
        for r in self.ris:
            out |= {r.sub.name, r.sup.name}
        return out


ABox = frozenset  # frozenset[Assertion]


def abox(*assertions: Assertion) -> frozenset:
    return frozenset(a.normalized() if isinstance(a, RoleAssertion) else a
                     for a in assertions)


def abox_names(a: Iterable[Assertion]):
    concepts: set[str] = set()
    roles: set[str] = set()
    inds: set[str] = set()
    for x in a:
        if isinstance(x, ConceptAssertion):
            concepts |= concept_names_of(x.concept)
            roles |= role_names_of(x.concept)
            inds.add(x.individual)
        else:
            roles.add(x.role.name)
            inds |= {x.subj, x.obj}
    return concepts, roles, inds


@dataclass(frozen=True)
class KB:
    ontology: Ontology
    abox: frozenset

    def individuals(self) -> frozenset[str]:
        return frozenset(abox_names(self.abox)[2])


@dataclass(frozen=True)
class TKB:
    ontology: Ontology
    aboxes: tuple  # tuple[frozenset, ...]
    signature: Signature

    @property
    def n(self) -> int:
        return len(self.aboxes) - 1

    def abox_at(self, i: int) -> frozenset:
        """A_i, with A_i = ∅ for i beyond the recorded sequence."""
        if i < 0:
            raise IndexError(i)
        return self.aboxes[i] if i < len(self.aboxes) else frozenset()

    def individuals(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.aboxes:
            out |= abox_names(a)[2]
        return frozenset(out)


# ---------------------------------------------------------------------------
# Conjunctive queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Ind:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Ind]


@dataclass(frozen=True, order=True)
class ConceptAtom:
    concept: BasicConcept
    term: Term


@dataclass(frozen=True, order=True)
class RoleAtom:
    role: Role
    subj: Term
    obj: Term

    def normalized(self) -> "RoleAtom":
        if self.role.inverted:
            return RoleAtom(Role(self.role.name), self.obj, self.subj)
        return self


Atom = Union[ConceptAtom, RoleAtom]


def atom_terms(a: Atom) -> tuple[Term, ...]:
    if isinstance(a, ConceptAtom):
        return (a.term,)
    return (a.subj, a.obj)


@dataclass(frozen=True)
class CQ:
    """A conjunctive query; Boolean iff free_vars is empty.

    Role atoms are stored normalized (no inverted roles); an empty atom set is
    the trivially true query.
    """

    atoms: frozenset  # frozenset[Atom]
    free_vars: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", frozenset(
            a.normalized() if isinstance(a, RoleAtom) else a for a in self.atoms))

    def variables(self) -> set[str]:
        return {t.name for a in self.atoms for t in atom_terms(a) if isinstance(t, Var)}

    def quantified_vars(self) -> set[str]:
        return self.variables() - set(self.free_vars)

    def individuals(self) -> set[str]:
        return {t.name for a in self.atoms for t in atom_terms(a) if isinstance(t, Ind)}

    def terms(self) -> set[Term]:
        return {t for a in self.atoms for t in atom_terms(a)}

    def is_boolean(self) -> bool:
        return not self.free_vars

    def connected_components(self) -> list["CQ"]:
        """Split into connected sub-queries (shared terms connect atoms)."""
        atoms = list(self.atoms)
        if not atoms:
            return [self]
        parent = list(range(len(atoms)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        by_term: dict[Term, int] = {}
        for i, a in enumerate(atoms):
            for t in atom_terms(a):
                if t in by_term:
                    parent[find(i)] = find(by_term[t])
                else:
                    by_term[t] = i
        groups: dict[int, list[Atom]] = {}
        for i, a in enumerate(atoms):
            groups.setdefault(find(i), []).append(a)
        comps = []
        for g in groups.values():
            gvars = {t.name for a in g for t in atom_terms(a) if isinstance(t, Var)}
            comps.append(CQ(frozenset(g), tuple(v for v in self.free_vars if v in gvars)))
        return sorted(comps, key=cq_sort_key)

    def is_connected(self) -> bool:
        return len(self.connected_components()) <= 1

    def rename(self, mapping: dict[str, str]) -> "CQ":
        def rt(t: Term) -> Term:
            return Var(mapping.get(t.name, t.name)) if isinstance(t, Var) else t

        new_atoms = []
        for a in self.atoms:
            if isinstance(a, ConceptAtom):
                new_atoms.append(ConceptAtom(a.concept, rt(a.term)))
            else:
                new_atoms.append(RoleAtom(a.role, rt(a.subj), rt(a.obj)))
        return CQ(frozenset(new_atoms), tuple(mapping.get(v, v) for v in self.free_vars))

    def ground(self, binding: dict[str, str]) -> "CQ":
        def rt(t: Term) -> Term:
            if isinstance(t, Var) and t.name in binding:
                return Ind(binding[t.name])
            return t

        new_atoms = []
        for a in self.atoms:
            if isinstance(a, ConceptAtom):
                new_atoms.append(ConceptAtom(a.concept, rt(a.term)))
            else:
                new_atoms.append(RoleAtom(a.role, rt(a.subj), rt(a.obj)))
        return CQ(frozenset(new_atoms),
                  tuple(v for v in self.free_vars if v not in binding))


def atom_sort_key(a: Atom):
    if isinstance(a, ConceptAtom):
        return (0, str(a.concept), str(a.term), "")
    return (1, str(a.role), str(a.subj), str(a.obj))


def cq_sort_key(q: CQ):
    return tuple(sorted(atom_sort_key(a) for a in q.atoms))


def cq_canonical_key(q: CQ):
    """A key identifying q up to renaming of quantified variables.

    Individuals and free variables stay fixed; quantified variables are
    replaced by their rank in a deterministic traversal.  Used to deduplicate
    rewriting output and enumerated witness queries.
    """
    order: dict[str, int] = {}

    def tkey(t: Term):
        if isinstance(t, Ind):
            return ("i", t.name)
        if t.name in q.free_vars:
            return ("f", t.name)
        if t.name not in order:
            order[t.name] = len(order)
        return ("v", order[t.name])

    keys = []
    for a in sorted(q.atoms, key=atom_sort_key):
        if isinstance(a, ConceptAtom):
            keys.append((0, str(a.concept), tkey(a.term)))
        else:
            keys.append((1, str(a.role), tkey(a.subj), tkey(a.obj)))
    return tuple(keys)


# ---------------------------------------------------------------------------
# Temporal conjunctive queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    cq: CQ


@dataclass(frozen=True)
class TrueQ:
    pass


@dataclass(frozen=True)
class FalseQ:
    pass


@dataclass(frozen=True)
class Not:
    arg: "TCQ"


@dataclass(frozen=True)
class And:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Or:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Implies:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Iff:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Next:
    arg: "TCQ"


@dataclass(frozen=True)
class Prev:
    arg: "TCQ"


@dataclass(frozen=True)
class Until:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Since:
    left: "TCQ"
    right: "TCQ"


@dataclass(frozen=True)
class Eventually:
    arg: "TCQ"


@dataclass(frozen=True)
class Globally:
    arg: "TCQ"


@dataclass(frozen=True)
class Once:
    arg: "TCQ"


@dataclass(frozen=True)
class Historically:
    arg: "TCQ"


TCQ = Union[Leaf, TrueQ, FalseQ, Not, And, Or, Implies, Iff, Next, Prev,
            Until, Since, Eventually, Globally, Once, Historically]

_UNARY = (Not, Next, Prev, Eventually, Globally, Once, Historically)
_BINARY = (And, Or, Implies, Iff, Until, Since)


def tcq_children(q: TCQ) -> tuple[TCQ, ...]:
    if isinstance(q, _UNARY):
        return (q.arg,)
    if isinstance(q, _BINARY):
        return (q.left, q.right)
    return ()


def tcq_leaves(q: TCQ) -> list[CQ]:
    """The CQs of q in left-to-right leaf order."""
    if isinstance(q, Leaf):
        return [q.cq]
    out: list[CQ] = []
    for c in tcq_children(q):
        out.extend(tcq_leaves(c))
    return out


def tcq_individuals(q: TCQ) -> set[str]:
    return set().union(*(cq.individuals() for cq in tcq_leaves(q)), set())


def negate(q: TCQ) -> TCQ:
    """¬q with double negation collapsed and the Table-3 constants flipped."""
    if isinstance(q, Not):
        return q.arg
    if isinstance(q, TrueQ):
        return FalseQ()
    if isinstance(q, FalseQ):
        return TrueQ()
    return Not(q)


def _map_leaves(q: TCQ, fn) -> TCQ:
    if isinstance(q, Leaf):
        return fn(q.cq)
    if isinstance(q, _UNARY):
        return type(q)(_map_leaves(q.arg, fn))
    if isinstance(q, _BINARY):
        return type(q)(_map_leaves(q.left, fn), _map_leaves(q.right, fn))
    return q


def ground_tcq(q: TCQ, binding: dict[str, str]) -> TCQ:
    return _map_leaves(q, lambda cq: Leaf(cq.ground(binding)))


def tcq_free_vars(q: TCQ) -> set[str]:
    return set().union(*(set(cq.free_vars) for cq in tcq_leaves(q)), set())


# ---------------------------------------------------------------------------
# Normalization and propositional abstraction
# ---------------------------------------------------------------------------


def normalize_tcq(q: TCQ) -> TCQ:
    """Split disconnected leaf CQs and rename variables apart across leaves.

    The result is a TCQ whose leaves are connected Boolean CQs over pairwise
    disjoint variable sets; renaming is positional, which makes the operation
    idempotent.
    """

    def split(node: TCQ) -> TCQ:
        if isinstance(node, Leaf):
            comps = node.cq.connected_components()
            out: TCQ = Leaf(comps[0])
            for c in comps[1:]:
                out = And(out, Leaf(c))
            return out
        if isinstance(node, _UNARY):
            return type(node)(split(node.arg))
        if isinstance(node, _BINARY):
            return type(node)(split(node.left), split(node.right))
        return node

    split_q = split(q)
    counter = itertools.count()

    def rename(node: TCQ) -> TCQ:
        if isinstance(node, Leaf):
            idx = next(counter)
            mapping = {v: f"x{idx}_{k}"
                       for k, v in enumerate(sorted(node.cq.quantified_vars()))}
            return Leaf(node.cq.rename(mapping))
        if isinstance(node, _UNARY):
            return type(node)(rename(node.arg))
        if isinstance(node, _BINARY):
            return type(node)(rename(node.left), rename(node.right))
        return node

    return rename(split_q)


def propositional_abstraction(q: TCQ):
    """Replace each leaf by a proposition; returns (ltl formula, leaf CQs).

    Distinct leaf occurrences become distinct propositions p_1..p_m in
    left-to-right order, mirroring the AST structurally (derived operators are
    preserved; the LTL engine expands them).
    """
    from . import ltl

    cq_list: list[CQ] = []

    def walk(node: TCQ):
        if isinstance(node, Leaf):
            cq_list.append(node.cq)
            return ltl.LProp(len(cq_list))
        if isinstance(node, TrueQ):
            return ltl.LTrue()
        if isinstance(node, FalseQ):
            return ltl.LNot(ltl.LTrue())
        if isinstance(node, _UNARY):
            sub = walk(node.arg)
            return {
                Not: ltl.LNot, Next: ltl.LNext, Prev: ltl.LPrev,
                Eventually: ltl.LEventually, Globally: ltl.LGlobally,
                Once: ltl.LOnce, Historically: ltl.LHistorically,
            }[type(node)](sub)
        left, right = walk(node.left), walk(node.right)
        return {
            And: ltl.LAnd, Or: ltl.LOr, Implies: ltl.LImplies, Iff: ltl.LIff,
            Until: ltl.LUntil, Since: ltl.LSince,
        }[type(node)](left, right)

    return walk(q), cq_list


# ---------------------------------------------------------------------------
# TKB validation
# ---------------------------------------------------------------------------


def infer_signature(ontology: Ontology, aboxes: Iterable[frozenset],
                    declared: Signature | None = None) -> Signature:
    concepts = set(ontology.concept_names())
    roles = set(ontology.role_names())
    inds: set[str] = set()
    for a in aboxes:
        c, r, i = abox_names(a)
        concepts |= c
        roles |= r
        inds |= i
    base = declared or Signature()
    return base.merged(Signature(frozenset(concepts), frozenset(roles), frozenset(inds)))


def validate_tkb(tkb: TKB, strict: bool = False, horn: bool = True) -> TKB:
    """Check well-formedness and return the TKB with a completed signature.

    strict restores the convention that every name used in an ABox is
    declared up front; horn rejects concept inclusions with disjunctive
    right-hand sides.
    """
    if len(tkb.aboxes) == 0:
        raise EmptySequence("a TKB needs at least one ABox")
    if horn:
        for c in tkb.ontology.cis:
            if not c.is_horn():
                raise FragmentViolation(f"non-horn concept inclusion: {c}")
    if strict:
        decl = tkb.signature
        onto_names = set(tkb.ontology.concept_names()) | set(tkb.ontology.role_names())
        undeclared = onto_names - (decl.concept_names | decl.role_names)
        if undeclared:
            raise UnknownName(f"undeclared in ontology: {sorted(undeclared)}")
        for i, a in enumerate(tkb.aboxes):
            c, r, ind = abox_names(a)
            missing = (c - decl.concept_names) | (r - decl.role_names)
            if missing:
                raise UnknownName(f"ABox {i} uses undeclared names: {sorted(missing)}")
    sig = infer_signature(tkb.ontology, tkb.aboxes, tkb.signature)
    return TKB(tkb.ontology, tkb.aboxes, sig)


def validate_tcq(q: TCQ, tkb: TKB, strict: bool = False) -> None:
    sig = tkb.signature
    for cq in tcq_leaves(q):
        for a in cq.atoms:
            if isinstance(a, ConceptAtom):
                missing = (concept_names_of(a.concept) - sig.concept_names) \
                    | (role_names_of(a.concept) - sig.role_names)
            else:
                missing = {a.role.name} - sig.role_names
            if missing:
                raise UnknownName(f"query uses undeclared names: {sorted(missing)}")
        if strict:
            foreign = cq.individuals() - set(tkb.individuals())
            if foreign:
                raise UnknownName(
                    f"query individuals absent from the ABoxes: {sorted(foreign)}")
