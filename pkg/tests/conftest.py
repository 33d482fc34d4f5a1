"""Shared fixtures: the running example from the docs and a seeded random
instance generator used by the differential suites."""

from __future__ import annotations

import random

import pytest

from tcqlite.model import (
    ABox, And, Atomic, CQ, ConceptAssertion, ConceptAtom, ConceptInclusion,
    Exists, Ind, KB, Leaf, Not, Ontology, Prev, Role, RoleAssertion,
    RoleAtom, RoleInclusion, Signature, TKB, Var, abox, ci,
)


def playground_tkb(rigid_rt: bool) -> TKB:
    """O = {A ⊑ ∃S, S ⊑ R, S ⊑ T}, data (∅, {B(a)}); R,T optionally rigid."""
    o = Ontology(frozenset({ci([Atomic("A")], Exists(Role("S")))}),
                 frozenset({RoleInclusion(Role("S"), Role("R")),
                            RoleInclusion(Role("S"), Role("T"))}))
    sig = Signature(frozenset({"A", "B"}), frozenset({"S", "R", "T"}),
                    frozenset({"a"}), frozenset(),
                    frozenset({"R", "T"}) if rigid_rt else frozenset())
    return TKB(o, (abox(), abox(ConceptAssertion(Atomic("B"), "a"))), sig)


def playground_query():
    q1 = CQ(frozenset({ConceptAtom(Atomic("A"), Ind("a"))}))
    q2 = CQ(frozenset({ConceptAtom(Atomic("B"), Ind("a")),
                       RoleAtom(Role("R"), Ind("a"), Var("x")),
                       RoleAtom(Role("T"), Ind("a"), Var("x"))}))
    return And(Prev(Leaf(q1)), Not(Leaf(q2)))


@pytest.fixture
def fixture_rigid():
    return playground_tkb(True), playground_query()


@pytest.fixture
def fixture_flexible():
    return playground_tkb(False), playground_query()


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

CONCEPTS = ["A", "B", "C"]
ROLES = ["R", "S"]
INDS = ["a", "b"]


def random_basic(rng, concepts, roles):
    if rng.random() < 0.6 or not roles:
        return Atomic(rng.choice(concepts))
    return Exists(Role(rng.choice(roles), rng.random() < 0.3))


def random_ontology(rng, concepts, roles) -> Ontology:
    cis = set()
    for _ in range(rng.randint(0, 4)):
        lhs = {random_basic(rng, concepts, roles)
               for _ in range(rng.randint(1, 2))}
        if rng.random() < 0.12:
            cis.add(ci(lhs, None))
        else:
            cis.add(ci(lhs, random_basic(rng, concepts, roles)))
    ris = set()
    if len(roles) >= 2:
        for _ in range(rng.randint(0, 2)):
            sub, sup = rng.sample(roles, 2)
            ris.add(RoleInclusion(Role(sub, rng.random() < 0.2),
                                  Role(sup, rng.random() < 0.2)))
    return Ontology(frozenset(cis), frozenset(ris))


def random_abox(rng, concepts, roles, inds) -> ABox:
    out = []
    for _ in range(rng.randint(0, 3)):
        positive = rng.random() < 0.85
        if rng.random() < 0.65:
            out.append(ConceptAssertion(random_basic(rng, concepts, roles),
                                        rng.choice(inds), positive))
        elif roles:
            out.append(RoleAssertion(Role(rng.choice(roles)),
                                     rng.choice(inds), rng.choice(inds),
                                     positive))
    return abox(*out)


def random_signature(rng, concepts, roles, inds, max_rigid=2) -> Signature:
    pool = [("c", c) for c in concepts] + [("r", r) for r in roles]
    rng.shuffle(pool)
    rigid_c, rigid_r = set(), set()
    for kind, name in pool[:rng.randint(0, max_rigid)]:
        (rigid_c if kind == "c" else rigid_r).add(name)
    return Signature(frozenset(concepts), frozenset(roles), frozenset(inds),
                     frozenset(rigid_c), frozenset(rigid_r))


def random_atemporal(rng):
    concepts = CONCEPTS[:rng.randint(1, 3)]
    roles = ROLES[:rng.randint(1, 2)]
    inds = INDS[:rng.randint(1, 2)]
    o = random_ontology(rng, concepts, roles)
    a = random_abox(rng, concepts, roles, inds)
    return o, a, concepts, roles, inds


def random_cq(rng, concepts, roles, inds, max_atoms=2) -> CQ:
    n_atoms = rng.randint(1, max_atoms)
    vars_pool = ["x", "y", "z"]
    atoms = set()
    terms: list = []
    for _ in range(n_atoms):
        def term():
            if terms and rng.random() < 0.55:
                return rng.choice(terms)
            if rng.random() < 0.45:
                t = Ind(rng.choice(inds))
            else:
                t = Var(vars_pool[len([t for t in terms
                                       if isinstance(t, Var)]) % 3]
                        + str(len(terms)))
            terms.append(t)
            return t

        if rng.random() < 0.55 or not roles:
            atoms.add(ConceptAtom(random_basic(rng, concepts, roles), term()))
        else:
            atoms.add(RoleAtom(Role(rng.choice(roles)), term(), term()))
    return CQ(frozenset(atoms))


def random_tcq(rng, concepts, roles, inds, max_leaves=3):
    from tcqlite import model

    leaves = [Leaf(random_cq(rng, concepts, roles, inds))
              for _ in range(rng.randint(1, max_leaves))]

    def build(parts):
        if len(parts) == 1:
            q = parts[0]
            r = rng.random()
            if r < 0.25:
                return model.Not(q)
            if r < 0.35:
                return model.Prev(q)
            if r < 0.45:
                return model.Next(q)
            if r < 0.52:
                return model.Eventually(q)
            if r < 0.59:
                return model.Globally(q)
            if r < 0.64:
                return model.Once(q)
            return q
        k = rng.randint(1, len(parts) - 1)
        left, right = build(parts[:k]), build(parts[k:])
        r = rng.random()
        if r < 0.45:
            return model.And(left, right)
        if r < 0.7:
            return model.Or(left, right)
        if r < 0.8:
            return model.Until(left, right)
        if r < 0.9:
            return model.Since(left, right)
        return model.Implies(left, right)

    return build(leaves)


def random_temporal_instance(rng, max_leaves=3, max_rigid=2):
    concepts = CONCEPTS[:rng.randint(1, 3)]
    roles = ROLES[:rng.randint(1, 2)]
    inds = INDS[:rng.randint(1, 2)]
    o = random_ontology(rng, concepts, roles)
    sig = random_signature(rng, concepts, roles, inds, max_rigid)
    n = rng.randint(0, 2)
    aboxes = tuple(random_abox(rng, concepts, roles, inds)
                   for _ in range(n + 1))
    tkb = TKB(o, aboxes, sig)
    phi = random_tcq(rng, concepts, roles, inds, max_leaves)
    return tkb, phi


def seeded(seed: int) -> random.Random:
    return random.Random(seed)
