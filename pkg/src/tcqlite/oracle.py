"""Brute-force semantic checkers at desk scale.

Everything here interprets the model-theoretic definitions directly and shares
no reasoning code with the decision procedures; the test suite uses it as
ground truth.  Found results are proofs; NotFound within bounds is
inconclusive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import ltl
from .errors import BoundsTooLarge
from .model import (
    ABox, Atomic, BasicConcept, CQ, ConceptAssertion, ConceptAtom,
    ConceptInclusion, Exists, Ind, KB, Ontology, Role, RoleAssertion,
    RoleAtom, Signature, TCQ, TKB, Var, atom_terms, propositional_abstraction,
)

# ---------------------------------------------------------------------------
# Finite interpretations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interpretation:
    domain: tuple
    concepts: dict          # name -> frozenset[elem]
    roles: dict             # name -> frozenset[(elem, elem)]
    ind_map: dict           # individual name -> elem

    def concept_ext(self, b: BasicConcept) -> frozenset:
        if isinstance(b, Atomic):
            return self.concepts.get(b.name, frozenset())
        pairs = self.roles.get(b.role.name, frozenset())
        if b.role.inverted:
            return frozenset(y for (_, y) in pairs)
        return frozenset(x for (x, _) in pairs)

    def role_ext(self, r: Role) -> frozenset:
        pairs = self.roles.get(r.name, frozenset())
        if r.inverted:
            return frozenset((y, x) for (x, y) in pairs)
        return pairs

    def satisfies_ci(self, c: ConceptInclusion) -> bool:
        lhs = set(self.domain)
        for b in c.lhs:
            lhs &= self.concept_ext(b)
        rhs: set = set()
        for b in c.rhs:
            rhs |= self.concept_ext(b)
        return lhs <= rhs

    def satisfies_ontology(self, o: Ontology) -> bool:
        return (all(self.satisfies_ci(c) for c in o.cis)
                and all(self.role_ext(r.sub) <= self.role_ext(r.sup)
                        for r in o.ris))

    def satisfies_assertion(self, a) -> bool:
        if isinstance(a, ConceptAssertion):
            inside = self.ind_map[a.individual] in self.concept_ext(a.concept)
            return inside if a.positive else not inside
        na = a.normalized()
        pair = (self.ind_map[na.subj], self.ind_map[na.obj])
        inside = pair in self.roles.get(na.role.name, frozenset())
        return inside if na.positive else not inside

    def satisfies_abox(self, a: ABox) -> bool:
        return all(self.satisfies_assertion(x) for x in a)

    def satisfies_cq(self, q: CQ) -> bool:
        """Exhaustive homomorphism check (Boolean q)."""
        terms = sorted(q.terms(), key=str)
        var_terms = [t for t in terms if isinstance(t, Var)]
        base = {}
        for t in terms:
            if isinstance(t, Ind):
                if t.name not in self.ind_map:
                    return False
                base[t] = self.ind_map[t.name]
        for combo in itertools.product(self.domain, repeat=len(var_terms)):
            assign = dict(base)
            assign.update(zip(var_terms, combo))
            ok = True
            for at in q.atoms:
                if isinstance(at, ConceptAtom):
                    if assign[at.term] not in self.concept_ext(at.concept):
                        ok = False
                        break
                else:
                    if (assign[at.subj], assign[at.obj]) not in self.role_ext(at.role):
                        ok = False
                        break
            if ok:
                return True
        return False


@dataclass(frozen=True)
class LassoStructure:
    """An ultimately periodic DL-LTL structure: stem I_0..I_{s-1}, then the
    cycle I_s..I_{s+p-1} forever.  All interpretations share the domain and
    the individual map; the rigid-name invariant is checked on construction.
    """

    stem: tuple       # tuple[Interpretation, ...]
    cycle: tuple      # tuple[Interpretation, ...], length >= 1
    rigid_concepts: frozenset = frozenset()
    rigid_roles: frozenset = frozenset()

    def __post_init__(self):
        assert len(self.cycle) >= 1
        every = list(self.stem) + list(self.cycle)
        first = every[0]
        for i in every[1:]:
            assert i.domain == first.domain and i.ind_map == first.ind_map
            for c in self.rigid_concepts:
                assert i.concepts.get(c, frozenset()) == \
                    first.concepts.get(c, frozenset())
            for r in self.rigid_roles:
                assert i.roles.get(r, frozenset()) == \
                    first.roles.get(r, frozenset())

    def at(self, t: int) -> Interpretation:
        s = len(self.stem)
        if t < s:
            return self.stem[t]
        return self.cycle[(t - s) % len(self.cycle)]


# ---------------------------------------------------------------------------
# LTL evaluation on an ultimately periodic propositional word
# ---------------------------------------------------------------------------


class _WordEval:
    """Exact LTL evaluation over (stem_worlds, cycle_worlds) repeated forever.

    Past operators are computed forward over the concrete prefix; until is
    solved by a least fixpoint over a window whose tail is confirmed periodic.
    The number of fixpoint sweeps is recorded so tests can assert the
    two-traversal stabilization bound.
    """

    def __init__(self, stem_worlds: tuple, cycle_worlds: tuple):
        self.stem = tuple(stem_worlds)
        self.cycle = tuple(cycle_worlds)
        self.p = len(cycle_worlds)
        self.sweeps_used = 0

    def word(self, t: int) -> frozenset:
        s = len(self.stem)
        if t < s:
            return self.stem[t]
        return self.cycle[(t - s) % self.p]

    def eval(self, f, at: int) -> bool:
        f = ltl.expand(f)
        depth = self._depth(f)
        horizon = len(self.stem) + (2 * depth + 4) * self.p
        horizon = max(horizon, at + 2 * self.p + 1)
        vals = self._values(f, horizon)
        return vals[at]

    def _depth(self, f) -> int:
        kids = ltl._children(f)
        d = max((self._depth(k) for k in kids), default=0)
        return d + (1 if isinstance(f, (ltl.LNext, ltl.LPrev, ltl.LUntil,
                                        ltl.LSince)) else 0)

    def _values(self, f, horizon: int) -> list:
        memo: dict = {}

        def seq(node) -> list:
            if node in memo:
                return memo[node]
            if isinstance(node, ltl.LProp):
                out = [node.index in self.word(t) for t in range(horizon)]
            elif isinstance(node, ltl.LTrue):
                out = [True] * horizon
            elif isinstance(node, ltl.LNot):
                out = [not v for v in seq(node.arg)]
            elif isinstance(node, ltl.LAnd):
                left, right = seq(node.left), seq(node.right)
                out = [a and b for a, b in zip(left, right)]
            elif isinstance(node, ltl.LPrev):
                child = seq(node.arg)
                out = [False] + child[:-1]
            elif isinstance(node, ltl.LSince):
                left, right = seq(node.left), seq(node.right)
                out = []
                prev = False
                for t in range(horizon):
                    prev = right[t] or (left[t] and prev)
                    out.append(prev)
            elif isinstance(node, ltl.LNext):
                child = seq(node.arg)
                self._assert_periodic(child)
                out = child[1:] + [child[horizon - self.p]]
            elif isinstance(node, ltl.LUntil):
                left, right = seq(node.left), seq(node.right)
                self._assert_periodic(left)
                self._assert_periodic(right)
                out = self._until(left, right)
            else:
                raise TypeError(node)
            memo[node] = out
            return out

        return seq(ltl.expand(f))

    def _assert_periodic(self, vals: list):
        n = len(vals)
        for t in range(n - 2 * self.p, n - self.p):
            assert vals[t] == vals[t + self.p], "sequence not yet periodic"

    def _until(self, left: list, right: list) -> list:
        n = len(left)
        out = [False] * n
        # least fixpoint over the final period, wrap t = n-1 -> n-p
        sweeps = 0
        changed = True
        while changed:
            changed = False
            sweeps += 1
            for t in range(n - 1, n - self.p - 1, -1):
                nxt = out[t + 1] if t + 1 < n else out[n - self.p]
                v = right[t] or (left[t] and nxt)
                if v != out[t]:
                    out[t] = v
                    changed = True
        self.sweeps_used = max(self.sweeps_used, sweeps - 1)
        for t in range(n - self.p - 1, -1, -1):
            out[t] = right[t] or (left[t] and out[t + 1])
        return out


def eval_ltl_on_word_lasso(f, stem_worlds, cycle_worlds, at: int) -> bool:
    return _WordEval(tuple(stem_worlds), tuple(cycle_worlds)).eval(f, at)


def eval_tcq_on_lasso(lasso: LassoStructure, phi: TCQ, at: int,
                      return_sweeps: bool = False):
    """Table-2 evaluation of a TCQ at a time point of the lasso."""
    pa, cqs = propositional_abstraction(phi)
    s, p = len(lasso.stem), len(lasso.cycle)
    assert at < s + p

    def world(interp: Interpretation) -> frozenset:
        return frozenset(j + 1 for j, q in enumerate(cqs) if interp.satisfies_cq(q))

    ev = _WordEval(tuple(world(i) for i in lasso.stem),
                   tuple(world(i) for i in lasso.cycle))
    result = ev.eval(pa, at)
    if return_sweeps:
        return result, ev.sweeps_used
    return result


# ---------------------------------------------------------------------------
# Bounded TCQ satisfiability search
# ---------------------------------------------------------------------------


def _subset_masks(n: int):
    return range(1 << n)


def _mask_to_set(mask: int, items: list) -> frozenset:
    return frozenset(x for i, x in enumerate(items) if mask >> i & 1)


def _skeleton_canonical(extensions: tuple, domain: tuple, fixed: set) -> bool:
    """Keep only the lexicographically least skeleton among permutations of
    the anonymous domain elements."""
    anon = [d for d in domain if d not in fixed]
    if len(anon) <= 1:
        return True

    def encode(perm_map):
        out = []
        for name, ext in extensions:
            ext2 = sorted(tuple(perm_map.get(e, e) for e in
                                (x if isinstance(x, tuple) else (x,)))
                          for x in ext)
            out.append((name, tuple(ext2)))
        return tuple(out)

    own = encode({})
    for perm in itertools.permutations(anon):
        pm = dict(zip(anon, perm))
        if encode(pm) < own:
            return False
    return True


def bounded_tcq_sat(phi: TCQ, tkb: TKB, domain_size: int, stem_bound: int,
                    cycle_bound: int, cap: int = 5_000_000
                    ) -> Optional[LassoStructure]:
    """Exhaustively search for an ultimately periodic model of phi w.r.t. tkb
    within the given bounds.  Returns a lasso on success and None when the
    bounds are exhausted (inconclusive).
    """
    sig = tkb.signature
    pa, cqs = propositional_abstraction(phi)
    n = tkb.n
    inds = sorted(tkb.individuals() | {i for q in cqs for i in q.individuals()})
    if len(inds) > domain_size:
        raise BoundsTooLarge(f"{len(inds)} individuals exceed domain bound")
    stem_lo = n + 1
    if stem_bound < stem_lo:
        stem_bound = stem_lo

    domain = tuple(range(domain_size))
    ind_map = {a: i for i, a in enumerate(inds)}
    concepts = sorted(sig.concept_names)
    roles = sorted(sig.role_names)
    rigid_c = [c for c in concepts if c in sig.rigid_concepts]
    rigid_r = [r for r in roles if r in sig.rigid_roles]
    flex_c = [c for c in concepts if c not in sig.rigid_concepts]
    flex_r = [r for r in roles if r not in sig.rigid_roles]

    pairs = [(x, y) for x in domain for y in domain]
    rigid_bits = len(rigid_c) * len(domain) + len(rigid_r) * len(pairs)
    flex_bits = len(flex_c) * len(domain) + len(flex_r) * len(pairs)
    est = (2 ** rigid_bits) * (2 ** flex_bits) * (n + 2)
    if est > cap:
        raise BoundsTooLarge(f"estimated {est} interpretations exceeds cap {cap}")

    m = len(cqs)
    abox_classes = [tkb.abox_at(i) for i in range(n + 1)] + [frozenset()]

    def rigid_skeletons():
        slots = [(c, list(domain)) for c in rigid_c] + \
                [(r, list(pairs)) for r in rigid_r]
        total_bits = [len(s[1]) for s in slots]
        for masks in itertools.product(*(_subset_masks(b) for b in total_bits)):
            exts = []
            for (name, items), mask in zip(slots, masks):
                exts.append((name, _mask_to_set(mask, items)))
            if _skeleton_canonical(tuple(exts), domain, set(ind_map.values())):
                yield dict(exts)

    def flexible_fill(skel: dict):
        slots = [(c, list(domain)) for c in flex_c] + \
                [(r, list(pairs)) for r in flex_r]
        total_bits = [len(s[1]) for s in slots]
        for masks in itertools.product(*(_subset_masks(b) for b in total_bits)):
            ext = dict(skel)
            for (name, items), mask in zip(slots, masks):
                ext[name] = _mask_to_set(mask, items)
            yield Interpretation(
                domain,
                {c: ext.get(c, frozenset()) for c in concepts},
                {r: ext.get(r, frozenset()) for r in roles},
                ind_map)

    for skel in rigid_skeletons():
        # locally valid interpretations per ABox class, collapsed to worlds
        reps: list[dict] = []
        feasible = True
        for cls_idx, a in enumerate(abox_classes):
            by_world: dict = {}
            for interp in flexible_fill(skel):
                if not interp.satisfies_ontology(tkb.ontology):
                    continue
                if not interp.satisfies_abox(a):
                    continue
                w = frozenset(j + 1 for j, q in enumerate(cqs)
                              if interp.satisfies_cq(q))
                by_world.setdefault(w, interp)
            if cls_idx <= n and not by_world:
                feasible = False
                break
            reps.append(by_world)
        if not feasible:
            continue
        free_worlds = reps[n + 1]
        if not free_worlds:
            continue

        wkey = lambda w: tuple(sorted(w))
        found = _word_lasso_search(pa, [sorted(r, key=wkey) for r in reps[:n + 1]],
                                   sorted(free_worlds, key=wkey), n, stem_bound,
                                   cycle_bound)
        if found is not None:
            stem_w, cycle_w = found
            stem = tuple(reps[t][w] if t <= n else free_worlds[w]
                         for t, w in enumerate(stem_w))
            cycle = tuple(free_worlds[w] for w in cycle_w)
            lasso = LassoStructure(stem, cycle, sig.rigid_concepts,
                                   sig.rigid_roles)
            assert eval_tcq_on_lasso(lasso, phi, n)
            return lasso
    return None


def _word_lasso_search(pa, stem_world_choices: list, free_worlds: list,
                       n: int, stem_bound: int, cycle_bound: int):
    """Search over propositional world lassos; stems start past the data."""
    for s in range(n + 1, stem_bound + 1):
        for p in range(1, cycle_bound + 1):
            if s + p > stem_bound + cycle_bound:
                continue
            position_pools = [stem_world_choices[t] if t <= n else free_worlds
                              for t in range(s)]
            for stem in itertools.product(*position_pools):
                for cycle in itertools.product(free_worlds, repeat=p):
                    if eval_ltl_on_word_lasso(pa, stem, cycle, n):
                        return stem, cycle
    return None


# ---------------------------------------------------------------------------
# Independent atemporal entailment (naive chase + exhaustive homomorphisms)
# ---------------------------------------------------------------------------


class _NaiveChase:
    """A from-scratch materialization of the positive chase, used only by the
    oracle so that CQ entailment has an implementation-independent mirror."""

    def __init__(self, kb: KB, depth: int, extra_inds=()):
        self.kb = kb
        self.types: dict = {}
        self.edges: set = set()      # (role name, x, y)
        self.depth: dict = {}
        self.children: dict = {}     # (element, Role) -> element
        inds = set(kb.individuals()) | set(extra_inds)
        for a in inds:
            self.types[a] = set()
            self.depth[a] = 0
        for assn in kb.abox:
            if isinstance(assn, ConceptAssertion) and assn.positive:
                self.types.setdefault(assn.individual, set()).add(assn.concept)
                self.depth.setdefault(assn.individual, 0)
            elif isinstance(assn, RoleAssertion) and assn.positive:
                na = assn.normalized()
                self.edges.add((na.role.name, na.subj, na.obj))
                for x in (na.subj, na.obj):
                    self.types.setdefault(x, set())
                    self.depth.setdefault(x, 0)
        self._run(depth)

    def _run(self, depth: int):
        o = self.kb.ontology
        changed = True
        while changed:
            changed = False
            for (r, x, y) in list(self.edges):
                for ri in o.ris:
                    for (sub, sup) in ((ri.sub, ri.sup),
                                       (ri.sub.inverse(), ri.sup.inverse())):
                        if sub == Role(r):
                            tgt = ((sup.name, y, x) if sup.inverted
                                   else (sup.name, x, y))
                            if tgt not in self.edges:
                                self.edges.add(tgt)
                                changed = True
                if Exists(Role(r)) not in self.types[x]:
                    self.types[x].add(Exists(Role(r)))
                    changed = True
                if Exists(Role(r, True)) not in self.types[y]:
                    self.types[y].add(Exists(Role(r, True)))
                    changed = True
            for el in list(self.types):
                t = self.types[el]
                for c in o.cis:
                    if c.rhs and c.lhs <= t and c.rhs[0] not in t:
                        t.add(c.rhs[0])
                        changed = True
                for b in sorted(t, key=str):
                    if isinstance(b, Exists) and self.depth[el] < depth \
                            and (el, b.role) not in self.children:
                        child = ("sk", el, str(b.role))
                        self.children[(el, b.role)] = child
                        self.types[child] = {Exists(b.role.inverse())}
                        self.depth[child] = self.depth[el] + 1
                        r = b.role
                        tgt = ((r.name, child, el) if r.inverted
                               else (r.name, el, child))
                        self.edges.add(tgt)
                        changed = True

    def elements(self):
        return list(self.types)


def _naive_saturate_seed(o: Ontology, seed: set) -> set:
    """CI/RI saturation of a single element's basic-concept set, written from
    scratch for the oracle path."""
    t = set(seed)
    changed = True
    while changed:
        changed = False
        for b in list(t):
            if isinstance(b, Exists):
                for ri in o.ris:
                    for (sub, sup) in ((ri.sub, ri.sup),
                                       (ri.sub.inverse(), ri.sup.inverse())):
                        if sub == b.role and Exists(sup) not in t:
                            t.add(Exists(sup))
                            changed = True
        for c in o.cis:
            if c.rhs and c.lhs <= t and c.rhs[0] not in t:
                t.add(c.rhs[0])
                changed = True
    return t


def _naive_inconsistent(kb: KB, chase: _NaiveChase) -> bool:
    """⊥-checks on the named part plus a walk over the (finitely many)
    generated-successor seed types, and the negative assertions."""
    o = kb.ontology
    bottoms = [c.lhs for c in o.cis if c.is_bottom()]

    def fires(t) -> bool:
        return any(lhs <= t for lhs in bottoms)

    seen_seeds: set = set()
    frontier: list = []
    for el, t in chase.types.items():
        if isinstance(el, str):
            if fires(t):
                return True
            frontier.extend(b.role for b in t if isinstance(b, Exists))
    while frontier:
        r = frontier.pop()
        if r in seen_seeds:
            continue
        seen_seeds.add(r)
        t = _naive_saturate_seed(o, {Exists(r.inverse())})
        if fires(t):
            return True
        frontier.extend(b.role for b in t if isinstance(b, Exists))

    for assn in kb.abox:
        if isinstance(assn, ConceptAssertion) and not assn.positive:
            if assn.concept in chase.types.get(assn.individual, set()):
                return True
        elif isinstance(assn, RoleAssertion) and not assn.positive:
            na = assn.normalized()
            if (na.role.name, na.subj, na.obj) in chase.edges:
                return True
    return False


def brute_cq_entailed(kb: KB, q: CQ) -> bool:
    """Exhaustive assignment search into an independently built chase, with
    plain per-atom pruning of partial assignments."""
    deep = _NaiveChase(kb, max(1, len(q.terms())), extra_inds=q.individuals())
    if not kb.individuals() and not q.individuals():
        deep = _NaiveChase(kb, max(1, len(q.terms())), extra_inds={"@any"})
    if _naive_inconsistent(kb, deep):
        return True
    elements = deep.elements()
    for t in q.terms():
        if isinstance(t, Ind) and t.name not in deep.types:
            return False
    atoms = sorted(q.atoms, key=str)
    var_terms = sorted({t.name for a in q.atoms for t in atom_terms(a)
                        if isinstance(t, Var)})

    def resolve(t, assign):
        return t.name if isinstance(t, Ind) else assign.get(t.name)

    def consistent_so_far(assign) -> bool:
        for at in atoms:
            if isinstance(at, ConceptAtom):
                v = resolve(at.term, assign)
                if v is not None and at.concept not in deep.types[v]:
                    return False
            else:
                s, o_ = resolve(at.subj, assign), resolve(at.obj, assign)
                if s is not None and o_ is not None \
                        and (at.role.name, s, o_) not in deep.edges:
                    return False
        return True

    def assign_next(idx: int, assign: dict) -> bool:
        if idx == len(var_terms):
            return True
        v = var_terms[idx]
        for el in elements:
            assign[v] = el
            if consistent_so_far(assign) and assign_next(idx + 1, assign):
                return True
            del assign[v]
        return False

    return consistent_so_far({}) and assign_next(0, {})
