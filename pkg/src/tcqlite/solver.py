"""End-to-end satisfiability and entailment of temporal queries.

The nondeterministic counters of the periodic-model procedure are replaced by
reachability over (type, undischarged flexible-successor set) states; tuple
guessing is an interleaved enumeration over entailment-closed rigid ABox
types, per-leaf query-set choices, and unions of the forced flexible-successor
requirements.  First SAT certificate wins; UNSAT requires exhausting the
enumeration; caps yield Unknown.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from . import dllite, ltl, rsat
from .errors import InconsistentInstantiation, ResourceLimit
from .model import (
    CQ, KB, TCQ, TKB, negate as tcq_negate, normalize_tcq,
    propositional_abstraction, validate_tkb,
)

INF = "inf"  # the empty-ABox position class beyond the data


@dataclass(frozen=True)
class Certificate:
    tup: rsat.RCompleteTuple
    worlds: tuple        # w_0..w_n
    stem_types: tuple    # types at positions 0..s-1 (covers the prefix)
    cycle_types: tuple

    def world_set(self, ts: ltl.TypeSystem) -> tuple:
        seen = []
        for t in self.stem_types + self.cycle_types:
            w = ts.world_of(t)
            if w not in seen:
                seen.append(w)
        return tuple(seen)


@dataclass(frozen=True)
class Verdict:
    satisfiable: Optional[bool]     # None = unknown (a cap was hit)
    certificate: Optional[Certificate] = None


class SolverContext:
    """Memoized per-(TKB, leaf list) state shared between a query and its
    negation (they abstract over the same CQ leaves)."""

    def __init__(self, tkb: TKB, cq_list: tuple):
        self.tkb = tkb
        self.cq_list = cq_list
        self.o = tkb.ontology
        self.sig = tkb.signature
        self.inds = tkb.individuals()
        self.aux = rsat.aux_individuals(cq_list)
        self._rigcons: dict = {}
        self._required: dict = {}
        self._ok: dict = {}
        self._base: dict = {}

    def abox_of(self, icls):
        return frozenset() if icls == INF else self.tkb.abox_at(icls)

    def rigcons(self, q_r: frozenset):
        hit = self._rigcons.get(q_r)
        if hit is None:
            try:
                hit = rsat.rigid_consequences(
                    self.o, (self.cq_list[j - 1] for j in sorted(q_r)), self.sig)
            except InconsistentInstantiation:
                hit = False
            self._rigcons[q_r] = hit
        return hit

    def forced_base(self, q_r: frozenset):
        """Least rigid assertion set every admissible A_R must contain, given
        that positions 0..n are always visited; None when no A_R can work."""
        hit = self._base.get(q_r)
        if hit is not None:
            return hit if hit != "none" else None
        rc = self.rigcons(q_r)
        if rc is False:
            self._base[q_r] = "none"
            return None
        cands = rsat.rigid_candidates(self.sig, sorted(self.inds))
        cur: frozenset = frozenset()
        while True:
            new = set(cur)
            for i in range(self.tkb.n + 1):
                kb = KB(self.o, frozenset(set(cur) | rc | self.tkb.abox_at(i)))
                if not dllite.is_consistent(kb):
                    self._base[q_r] = "none"
                    return None
                m = dllite._canonical(kb, frozenset(self.inds))
                for cand in cands:
                    if cand in new:
                        continue
                    if isinstance(cand, rsat.ConceptAssertion):
                        if cand.individual in m.named and m.has_concept(
                                cand.individual, cand.concept):
                            new.add(cand)
                    elif (cand.subj, cand.obj) in m.role_pairs.get(
                            cand.role.name, set()):
                        new.add(cand)
            if frozenset(new) == cur:
                break
            cur = frozenset(new)
        self._base[q_r] = cur
        return cur

    def required(self, a_r: frozenset, q_r: frozenset, w: frozenset, icls):
        """REQUIRED(W, i): flexible ∃S(b) entailed by K_R without the tree
        ABox; None when that KB is inconsistent (position unusable)."""
        key = (a_r, q_r, w, icls)
        hit = self._required.get(key)
        if hit is None:
            rc = self.rigcons(q_r)
            if rc is False:
                hit = "inconsistent"
            else:
                base = frozenset(set(a_r) | rc
                                 | rsat.instantiate(self.cq_list[j - 1]
                                                    for j in sorted(w))
                                 | self.abox_of(icls))
                kb = KB(self.o, base)
                if not dllite.is_consistent(kb):
                    hit = "inconsistent"
                else:
                    hit = rsat.required_rf(self.o, self.sig, kb,
                                           self.inds | self.aux)
            self._required[key] = hit
        return None if hit == "inconsistent" else hit

    def ok(self, tup: rsat.RCompleteTuple, w: frozenset, icls) -> bool:
        key = (tup, w, icls)
        hit = self._ok.get(key)
        if hit is None:
            hit = rsat.rsatisfiable(self.cq_list, self.o, self.sig,
                                    self.abox_of(icls), tup, w, self.inds)
            self._ok[key] = hit
        return hit


_CONTEXTS: dict = {}


def _context(tkb: TKB, cq_list: tuple) -> SolverContext:
    key = (tkb, cq_list)
    c = _CONTEXTS.get(key)
    if c is None:
        if len(_CONTEXTS) > 64:
            _CONTEXTS.clear()
        c = _CONTEXTS[key] = SolverContext(tkb, cq_list)
    return c


def satisfiable(phi: TCQ, tkb: TKB, max_work: int = 2_000_000,
                jobs: int = 1) -> Verdict:
    """Decide whether phi has a model w.r.t. tkb (evaluated at time point n)."""
    tkb = validate_tkb(tkb)
    phi_n = normalize_tcq(phi)
    pa, cq_list = propositional_abstraction(phi_n)
    cq_list = tuple(cq_list)
    c = _context(tkb, cq_list)
    search = _Search(c, pa, max_work)
    try:
        cert = search.run()
    except ResourceLimit:
        return Verdict(None)
    if cert is not None:
        return Verdict(True, cert)
    return Verdict(search.exhausted_to_verdict())


class _Search:
    def __init__(self, c: SolverContext, pa, max_work: int):
        self.c = c
        self.pa = pa
        self.ts = ltl.TypeSystem([pa])
        self.pa_x = ltl.expand(pa)
        self.max_work = max_work
        self.work = 0
        self.hit_cap = False

    def spend(self, units: int = 1):
        self.work += units
        if self.work > self.max_work:
            raise ResourceLimit(self.work)

    def exhausted_to_verdict(self) -> Optional[bool]:
        return None if self.hit_cap else False

    def run(self) -> Optional[Certificate]:
        m = len(self.c.cq_list)
        for choice in itertools.product(*([
                ((True, False), (False, True), (True, True))] * m)):
            q_r = frozenset(j + 1 for j, (r, _) in enumerate(choice) if r)
            q_rn = frozenset(j + 1 for j, (_, rn) in enumerate(choice) if rn)
            cert = self.run_query_sets(q_r, q_rn)
            if cert is not None:
                return cert
        return None

    def run_query_sets(self, q_r, q_rn) -> Optional[Certificate]:
        c = self.c
        base = c.forced_base(q_r)
        if base is None:
            return None
        i_classes = list(range(c.tkb.n + 1)) + [INF]
        for a_r in rsat.enumerate_rigid_types(c.o, c.sig, tuple(sorted(c.inds)),
                                              base):
            self.spend(4)
            # distinct flexible-successor requirement sets over usable positions
            req_values = set()
            usable = {}
            for w in self._candidate_worlds(q_r, q_rn):
                for icls in i_classes:
                    req = c.required(a_r, q_r, w, icls)
                    if req is not None:
                        usable[(w, icls)] = req
                        req_values.add(req)
            if not usable:
                continue
            req_list = sorted(req_values, key=lambda s: sorted(map(str, s)))
            seen_rf = set()
            for k in range(len(req_list) + 1):
                for combo in itertools.combinations(req_list, k):
                    r_f = frozenset().union(*combo) if combo else frozenset()
                    if r_f in seen_rf:
                        continue
                    seen_rf.add(r_f)
                    tup = rsat.RCompleteTuple(a_r, q_r, q_rn, r_f)
                    cert = self.search_lasso(tup, usable)
                    if cert is not None:
                        return cert
        return None

    def _candidate_worlds(self, q_r, q_rn):
        m = len(self.c.cq_list)
        out = []
        for w in (frozenset(x) for x in _powerset(range(1, m + 1))):
            if w <= q_r and frozenset(range(1, m + 1)) - w <= q_rn:
                out.append(w)
        return out

    def search_lasso(self, tup, usable) -> Optional[Certificate]:
        c, ts = self.c, self.ts
        n = c.tkb.n

        def ok(w, icls) -> bool:
            if (w, icls) not in usable:
                return False
            self.spend()
            return c.ok(tup, w, icls)

        def discharge(w, icls) -> frozenset:
            return usable[(w, icls)] & tup.r_f

        # prefix layers over (type, remaining) states
        layer: dict = {}
        parents: list[dict] = []
        for t in ts.types():
            w = ts.world_of(t)
            if ts.is_initial(t) and ok(w, 0) and (n != 0 or self.pa_x in t):
                layer[(t, tup.r_f - discharge(w, 0))] = None
        parents.append(dict(layer))
        for i in range(1, n + 1):
            nxt: dict = {}
            for (t, rem) in layer:
                for u in ts.types():
                    w = ts.world_of(u)
                    if not ts.t_compatible(t, u):
                        continue
                    if i == n and self.pa_x not in u:
                        continue
                    if not ok(w, i):
                        continue
                    state = (u, rem - discharge(w, i))
                    if state not in nxt:
                        nxt[state] = (t, rem)
            layer = nxt
            parents.append(dict(layer))
            if not layer:
                return None

        # graph beyond the data: nodes are types whose world passes ok(·, INF)
        post_nodes = [t for t in ts.types() if ok(ts.world_of(t), INF)]
        succ_cache: dict = {}

        def succ(t):
            hit = succ_cache.get(t)
            if hit is None:
                hit = succ_cache[t] = [u for u in post_nodes
                                       if ts.t_compatible(t, u)]
            return hit

        good = ltl._good_cycle_starts(ts, post_nodes, succ)
        scc_cover: dict = {}

        def cycle_ok(t, rem) -> bool:
            if t not in good:
                return False
            if t not in scc_cover:
                comp = ltl._scc_of(t, succ)
                scc_cover[t] = (comp, frozenset().union(
                    *(discharge(ts.world_of(u), INF) for u in comp), frozenset()))
            comp, cover = scc_cover[t]
            return rem <= cover

        # search from position-n states through the post graph
        from collections import deque

        post_set = set(post_nodes)
        queue = deque(layer)
        seen = set(layer)
        back: dict = {s: None for s in layer}
        accept = next((s for s in layer
                       if s[0] in post_set and cycle_ok(s[0], s[1])), None)
        while accept is None and queue:
            (t, rem) = queue.popleft()
            self.spend()
            for u in (succ(t) if t in post_set else
                      (u for u in post_nodes if ts.t_compatible(t, u))):
                rem2 = rem - discharge(ts.world_of(u), INF)
                state = (u, rem2)
                if state in seen:
                    continue
                seen.add(state)
                back[state] = (t, rem)
                if cycle_ok(u, rem2):
                    accept = state
                    break
                queue.append(state)
        if accept is None:
            return None
        return self._build_certificate(tup, usable, parents, back, accept, succ)

    def _build_certificate(self, tup, usable, parents, back, accept, succ):
        ts = self.ts
        # path of states from a position-n state to the accept (cycle start)
        post_path = [accept]
        while back[post_path[-1]] is not None:
            post_path.append(back[post_path[-1]])
        post_path.reverse()
        # prefix states at positions 0..n, walking parent links backwards
        state = post_path[0]
        prefix_states = [state]
        for i in range(len(parents) - 1, 0, -1):
            state = parents[i][state]
            prefix_states.append(state)
        prefix_states.reverse()
        worlds = tuple(ts.world_of(t) for (t, _) in prefix_states)
        stem_types = tuple(t for (t, _) in prefix_states) + \
            tuple(t for (t, _) in post_path[1:-1])
        if len(post_path) == 1:
            stem_types = stem_types[:-1]  # the cycle starts at position n

        cycle_start, rem = accept
        comp = ltl._scc_of(cycle_start, succ)

        def cyc_succ(t):
            return [u for u in succ(t) if u in comp]

        needed = []
        for f in sorted(cycle_start, key=str):
            if isinstance(f, ltl.LUntil):
                node = next((u for u in comp if f.right in u), None)
                if node is not None and node not in needed:
                    needed.append(node)
        for assn in sorted(rem, key=str):
            node = next((u for u in comp
                         if assn in usable.get((ts.world_of(u), INF),
                                               frozenset())), None)
            if node is not None and node not in needed:
                needed.append(node)
        walk = [cycle_start]
        for tgt in needed:
            walk.extend(ltl._path_within(walk[-1], tgt, comp, cyc_succ)[1:])
        walk.extend(ltl._path_within(walk[-1], cycle_start, comp, cyc_succ)[1:])
        cycle = tuple(walk[:-1]) if len(walk) > 1 else (cycle_start,)
        return Certificate(tup, worlds, stem_types, cycle)


def _powerset(items):
    items = list(items)
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


def entails(phi: TCQ, tkb: TKB, max_work: int = 2_000_000) -> Optional[bool]:
    """phi is entailed iff ¬phi has no model; None when the search capped."""
    v = satisfiable(tcq_negate(phi), tkb, max_work)
    if v.satisfiable is None:
        return None
    return not v.satisfiable
