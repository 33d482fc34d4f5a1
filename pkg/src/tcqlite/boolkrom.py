"""Expressing complex concept inclusions as negated CQs over a krom ontology.

Inclusions with qualified restrictions or long boolean combinations are
normalized innermost-first into three primitive shapes, each mapped to a
negated CQ; complement names tie the query side to the ontology side.  The
output is a transformation artifact: downstream reasoning in the krom
fragment is out of scope.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import UnsupportedShape
from .model import (
    And, Atomic, BasicConcept, CQ, ConceptAtom, ConceptInclusion, Exists,
    Globally, Historically, Implies, Leaf, Not, Ontology, Role, RoleAtom,
    Signature, TCQ, TKB, Var, ci,
)

# ---------------------------------------------------------------------------
# Extended concept expressions (input only)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CName:
    name: str


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class ExistsQ:
    role: Role
    filler: Optional["ExtConcept"] = None   # None = unqualified


@dataclass(frozen=True)
class ForallQ:
    role: Role
    filler: "ExtConcept"


@dataclass(frozen=True)
class AndC:
    parts: tuple


@dataclass(frozen=True)
class OrC:
    parts: tuple


ExtConcept = Union[CName, Top, ExistsQ, ForallQ, AndC, OrC]


@dataclass(frozen=True)
class ExtendedCI:
    lhs: ExtConcept
    rhs: ExtConcept


def ext_names(c: ExtConcept) -> set[str]:
    if isinstance(c, CName):
        return {c.name}
    if isinstance(c, (ExistsQ, ForallQ)):
        return ext_names(c.filler) if getattr(c, "filler", None) else set()
    if isinstance(c, (AndC, OrC)):
        return set().union(*(ext_names(p) for p in c.parts), set())
    return set()


# ---------------------------------------------------------------------------
# Fresh names and complements
# ---------------------------------------------------------------------------


class NamePool:
    def __init__(self, taken: Iterable[str]):
        self.taken = set(taken)
        self.counter = itertools.count(1)
        self.fresh_names: list[str] = []
        self.bars: dict[str, str] = {}

    def fresh(self, hint: str = "X") -> str:
        while True:
            cand = f"{hint}_{next(self.counter)}"
            if cand not in self.taken:
                self.taken.add(cand)
                self.fresh_names.append(cand)
                return cand

    def bar(self, name: str) -> str:
        if name not in self.bars:
            cand = name + "_c"
            while cand in self.taken:
                cand = cand + "_c"
            self.taken.add(cand)
            self.fresh_names.append(cand)
            self.bars[name] = cand
        return self.bars[name]


def complement_axioms(names: Iterable[str],
                      pool: Optional[NamePool] = None) -> tuple:
    """⊤ ⊑ A ⊔ Ā and A ⊓ Ā ⊑ ⊥ for each name; returns (CIs, name map)."""
    pool = pool or NamePool(names)
    cis = []
    mapping = {}
    for a in sorted(set(names)):
        bar = pool.bar(a)
        mapping[a] = bar
        cis.append(ci([], (Atomic(a), Atomic(bar))))
        cis.append(ci([Atomic(a), Atomic(bar)], None))
    return tuple(cis), mapping


# ---------------------------------------------------------------------------
# Normalization to the three primitive shapes
# ---------------------------------------------------------------------------


def _is_basic(c: ExtConcept) -> bool:
    return isinstance(c, CName) or (isinstance(c, ExistsQ) and c.filler is None)


def _to_basic(c: ExtConcept) -> BasicConcept:
    if isinstance(c, CName):
        return Atomic(c.name)
    if isinstance(c, ExistsQ) and c.filler is None:
        return Exists(c.role)
    raise UnsupportedShape(c)


@dataclass
class _Normalizer:
    """Innermost-first structural naming.

    A complex subconcept at a negative occurrence (left of ⊑, fillers of a
    left-hand ∃) is replaced by a fresh name N with c ⊑ N; at a positive
    occurrence (right of ⊑, fillers of a right-hand ∀) by N with N ⊑ c.
    """

    pool: NamePool
    out_plain: list          # primitive core CIs (krom or row-3 material)
    out_row1: list           # (role, filler basic, target name)
    out_row2: list           # (source basic, role, filler name)

    def __post_init__(self):
        self._named: dict = {}

    def name_neg(self, c: ExtConcept) -> BasicConcept:
        if _is_basic(c):
            return _to_basic(c)
        key = ("neg", c)
        if key not in self._named:
            fresh = Atomic(self.pool.fresh("A"))
            self._named[key] = fresh
            self.add(ExtendedCI(c, CName(fresh.name)))
        return self._named[key]

    def name_pos(self, c: ExtConcept) -> BasicConcept:
        if _is_basic(c):
            return _to_basic(c)
        key = ("pos", c)
        if key not in self._named:
            fresh = Atomic(self.pool.fresh("A"))
            self._named[key] = fresh
            self.add(ExtendedCI(CName(fresh.name), c))
        return self._named[key]

    def _pos_name_atomic(self, c: ExtConcept) -> Atomic:
        """Like name_pos but always a concept name (so it can be barred)."""
        named = self.name_pos(c)
        if isinstance(named, Atomic):
            return named
        aux = Atomic(self.pool.fresh("A"))
        self.out_plain.append(ci([aux], named))
        return aux

    def add(self, e: ExtendedCI):
        lhs, rhs = e.lhs, e.rhs
        if isinstance(lhs, OrC):
            for part in lhs.parts:
                self.add(ExtendedCI(part, rhs))
            return
        if isinstance(rhs, AndC):
            for part in rhs.parts:
                self.add(ExtendedCI(lhs, part))
            return
        if isinstance(lhs, ForallQ):
            raise UnsupportedShape("value restriction on the left-hand side")
        if isinstance(rhs, ExistsQ) and rhs.filler is not None:
            raise UnsupportedShape("qualified existential on the right-hand side")
        if isinstance(lhs, ExistsQ) and lhs.filler is not None:
            filler = self.name_neg(lhs.filler)
            target = self._pos_name_atomic(rhs)
            self.out_row1.append((lhs.role, filler, target.name))
            return
        if isinstance(rhs, ForallQ):
            filler = self._pos_name_atomic(rhs.filler)
            source = self.name_neg(lhs)
            self.out_row2.append((source, rhs.role, filler.name))
            return
        # boolean shape: conjunction of basics ⊑ disjunction of basics
        lhs_parts = [] if isinstance(lhs, Top) else (
            list(lhs.parts) if isinstance(lhs, AndC) else [lhs])
        rhs_parts = list(rhs.parts) if isinstance(rhs, OrC) else [rhs]
        if any(isinstance(p, Top) for p in rhs_parts):
            return  # trivially satisfied
        lhs_basics = []
        for p in lhs_parts:
            if isinstance(p, Top):
                continue
            lhs_basics.append(self.name_neg(p))
        rhs_basics = [self.name_pos(p) for p in rhs_parts]
        self.out_plain.append(ci(lhs_basics, tuple(rhs_basics)))


# ---------------------------------------------------------------------------
# Table-4 rows as negated CQs
# ---------------------------------------------------------------------------


def _row1_tcq(role: Role, filler: BasicConcept, target_bar: str) -> TCQ:
    x, y = Var("x"), Var("y")
    return Not(Leaf(CQ(frozenset({
        RoleAtom(role, x, y), ConceptAtom(filler, y),
        ConceptAtom(Atomic(target_bar), x)}))))


def _row2_tcq(source: BasicConcept, role: Role, filler_bar: str) -> TCQ:
    x, y = Var("x"), Var("y")
    return Not(Leaf(CQ(frozenset({
        ConceptAtom(source, x), RoleAtom(role, x, y),
        ConceptAtom(Atomic(filler_bar), y)}))))


def _row3_tcq(lhs: Iterable[BasicConcept], rhs_bars: Iterable[str]) -> TCQ:
    x = Var("x")
    atoms = {ConceptAtom(b, x) for b in lhs}
    atoms |= {ConceptAtom(Atomic(b), x) for b in rhs_bars}
    return Not(Leaf(CQ(frozenset(atoms))))


def ci_to_tcq(e: ExtendedCI, taken_names: Iterable[str] = ()):
    """Normalize one extended CI; returns (negated-CQ TCQs, auxiliary krom
    CIs including complements, fresh names introduced)."""
    pool = NamePool(set(taken_names) | ext_names(e.lhs) | ext_names(e.rhs))
    norm = _Normalizer(pool, [], [], [])
    norm.add(e)
    tcqs: list[TCQ] = []
    aux_cis: list[ConceptInclusion] = []
    bar_needed: set[str] = set()

    for role, filler, target in norm.out_row1:
        bar_needed.add(target)
        tcqs.append(_row1_tcq(role, filler, pool.bar(target)))
    for source, role, filler in norm.out_row2:
        bar_needed.add(filler)
        tcqs.append(_row2_tcq(source, role, pool.bar(filler)))
    for c in norm.out_plain:
        if c.is_krom():
            aux_cis.append(c)
            continue
        rhs_names = []
        for b in c.rhs:
            if not isinstance(b, Atomic):
                aux = Atomic(pool.fresh("A"))
                aux_cis.append(ci([aux], b))
                rhs_names.append(aux.name)
            else:
                rhs_names.append(b.name)
        bar_needed |= set(rhs_names)
        tcqs.append(_row3_tcq(c.lhs, [pool.bar(nm) for nm in rhs_names]))

    comp_cis, _ = complement_axioms(sorted(bar_needed), pool)
    return tuple(tcqs), tuple(aux_cis) + comp_cis, tuple(pool.fresh_names)


def ext_concept_ext(interp, c: ExtConcept) -> frozenset:
    """Extension of an extended concept in a finite interpretation; used by
    the brute-force equivalence checks."""
    if isinstance(c, CName):
        return interp.concept_ext(Atomic(c.name))
    if isinstance(c, Top):
        return frozenset(interp.domain)
    if isinstance(c, ExistsQ):
        pairs = interp.role_ext(c.role)
        if c.filler is None:
            return frozenset(x for (x, _) in pairs)
        filler = ext_concept_ext(interp, c.filler)
        return frozenset(x for (x, y) in pairs if y in filler)
    if isinstance(c, ForallQ):
        pairs = interp.role_ext(c.role)
        filler = ext_concept_ext(interp, c.filler)
        return frozenset(x for x in interp.domain
                         if all(y in filler for (x2, y) in pairs if x2 == x))
    if isinstance(c, AndC):
        out = frozenset(interp.domain)
        for p in c.parts:
            out &= ext_concept_ext(interp, p)
        return out
    if isinstance(c, OrC):
        out: frozenset = frozenset()
        for p in c.parts:
            out |= ext_concept_ext(interp, p)
        return out
    raise TypeError(c)


# ---------------------------------------------------------------------------
# The global reduction
# ---------------------------------------------------------------------------


def reduce_bool_to_krom(phi: TCQ, tkb: TKB, extended: Iterable[ExtendedCI] = (),
                        mode: str = "entail"):
    """Translate away every non-krom CI (including the given qualified ones);
    returns (phi', TKB with a krom ontology).

    mode selects the query composition: "entail" yields (always Ψ) → Φ,
    "sat" yields (always Ψ) ∧ Φ.
    """
    taken = set(tkb.signature.concept_names) | set(tkb.signature.role_names) \
        | set(tkb.ontology.concept_names()) | set(tkb.ontology.role_names())
    keep = [c for c in tkb.ontology.cis if c.is_krom()]
    to_translate: list[ExtendedCI] = list(extended)
    for c in tkb.ontology.cis:
        if c.is_krom():
            continue
        lhs = AndC(tuple(_basic_to_ext(b) for b in sorted(c.lhs, key=str))) \
            if c.lhs else Top()
        rhs = OrC(tuple(_basic_to_ext(b) for b in c.rhs))
        to_translate.append(ExtendedCI(lhs, rhs))

    tcq_parts: list[TCQ] = []
    new_cis: list[ConceptInclusion] = list(keep)
    fresh_all: list[str] = []
    for e in to_translate:
        tcqs, aux, fresh = ci_to_tcq(e, taken)
        taken |= set(fresh)
        fresh_all.extend(fresh)
        tcq_parts.extend(tcqs)
        new_cis.extend(aux)

    onto = Ontology(frozenset(new_cis), tkb.ontology.ris)
    for c in onto.cis:
        assert c.is_krom(), f"reduction left a non-krom CI: {c}"
    sig = Signature(
        tkb.signature.concept_names | frozenset(fresh_all),
        tkb.signature.role_names,
        tkb.signature.individual_names,
        tkb.signature.rigid_concepts,
        tkb.signature.rigid_roles,
    )
    new_tkb = TKB(onto, tkb.aboxes, sig)

    if not tcq_parts:
        return phi, new_tkb
    psi: TCQ = tcq_parts[0]
    for part in tcq_parts[1:]:
        psi = And(psi, part)
    boxed = Historically(Globally(psi))
    out = Implies(boxed, phi) if mode == "entail" else And(boxed, phi)
    return out, new_tkb


def _basic_to_ext(b: BasicConcept) -> ExtConcept:
    if isinstance(b, Atomic):
        return CName(b.name)
    return ExistsQ(b.role, None)
