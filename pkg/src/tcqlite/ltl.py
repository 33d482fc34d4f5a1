"""Propositional LTL with past: closure sets, types, restricted satisfiability
over a fixed world pool, and the separated-formula decomposition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import NotSeparated

# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class LProp:
    index: int

    def __str__(self):
        return f"p{self.index}"


@dataclass(frozen=True)
class LTrue:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class LNot:
    arg: "LTL"

    def __str__(self):
        return f"!({self.arg})"


@dataclass(frozen=True)
class LAnd:
    left: "LTL"
    right: "LTL"

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class LOr:
    left: "LTL"
    right: "LTL"


@dataclass(frozen=True)
class LImplies:
    left: "LTL"
    right: "LTL"


@dataclass(frozen=True)
class LIff:
    left: "LTL"
    right: "LTL"


@dataclass(frozen=True)
class LNext:
    arg: "LTL"

    def __str__(self):
        return f"X({self.arg})"


@dataclass(frozen=True)
class LPrev:
    arg: "LTL"

    def __str__(self):
        return f"Y({self.arg})"


@dataclass(frozen=True)
class LUntil:
    left: "LTL"
    right: "LTL"

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class LSince:
    left: "LTL"
    right: "LTL"

    def __str__(self):
        return f"({self.left} S {self.right})"


@dataclass(frozen=True)
class LEventually:
    arg: "LTL"


@dataclass(frozen=True)
class LGlobally:
    arg: "LTL"


@dataclass(frozen=True)
class LOnce:
    arg: "LTL"


@dataclass(frozen=True)
class LHistorically:
    arg: "LTL"


LTL = Union[LProp, LTrue, LNot, LAnd, LOr, LImplies, LIff, LNext, LPrev,
            LUntil, LSince, LEventually, LGlobally, LOnce, LHistorically]

World = frozenset  # frozenset[int], proposition indices


def expand(f: LTL) -> LTL:
    """Expand derived operators into the core set
    {prop, true, not, and, next, prev, until, since}."""
    if isinstance(f, (LProp, LTrue)):
        return f
    if isinstance(f, LNot):
        return LNot(expand(f.arg))
    if isinstance(f, LAnd):
        return LAnd(expand(f.left), expand(f.right))
    if isinstance(f, LOr):
        return LNot(LAnd(LNot(expand(f.left)), LNot(expand(f.right))))
    if isinstance(f, LImplies):
        return expand(LOr(LNot(f.left), f.right))
    if isinstance(f, LIff):
        return expand(LAnd(LImplies(f.left, f.right), LImplies(f.right, f.left)))
    if isinstance(f, LNext):
        return LNext(expand(f.arg))
    if isinstance(f, LPrev):
        return LPrev(expand(f.arg))
    if isinstance(f, LUntil):
        return LUntil(expand(f.left), expand(f.right))
    if isinstance(f, LSince):
        return LSince(expand(f.left), expand(f.right))
    if isinstance(f, LEventually):
        return LUntil(LTrue(), expand(f.arg))
    if isinstance(f, LGlobally):
        return LNot(LUntil(LTrue(), LNot(expand(f.arg))))
    if isinstance(f, LOnce):
        return LSince(LTrue(), expand(f.arg))
    if isinstance(f, LHistorically):
        return LNot(LSince(LTrue(), LNot(expand(f.arg))))
    raise TypeError(f)


def neg(f: LTL) -> LTL:
    return f.arg if isinstance(f, LNot) else LNot(f)


def props_of(f: LTL) -> set[int]:
    if isinstance(f, LProp):
        return {f.index}
    out: set[int] = set()
    for c in _children(f):
        out |= props_of(c)
    return out


def _children(f: LTL) -> tuple:
    if isinstance(f, (LNot, LNext, LPrev, LEventually, LGlobally, LOnce, LHistorically)):
        return (f.arg,)
    if isinstance(f, (LAnd, LOr, LImplies, LIff, LUntil, LSince)):
        return (f.left, f.right)
    return ()


def subformulas(f: LTL) -> set[LTL]:
    out = {f}
    for c in _children(f):
        out |= subformulas(c)
    return out


def closure(fs: Iterable[LTL]) -> frozenset:
    """Subformula closure plus negations, with ¬¬φ collapsed (core ops only)."""
    subs: set[LTL] = set()
    for f in fs:
        subs |= subformulas(expand(f))
    pos = {s.arg if isinstance(s, LNot) else s for s in subs}
    return frozenset(pos) | frozenset(LNot(p) for p in pos)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class TypeSystem:
    """The types over Clo(fs), with initiality/compatibility predicates."""

    def __init__(self, fs: Iterable[LTL]):
        self.clo = closure(fs)
        self.positives = sorted((f for f in self.clo if not isinstance(f, LNot)),
                                key=str)
        self.props = frozenset(p.index for p in self.positives if isinstance(p, LProp))
        self._types: Optional[tuple] = None

    def types(self) -> tuple:
        if self._types is None:
            self._types = tuple(self._enumerate())
        return self._types

    def _enumerate(self):
        # free choices for non-boolean positives; And/True memberships derive
        free = [p for p in self.positives if not isinstance(p, (LAnd, LTrue))]
        for bits in itertools.product((False, True), repeat=len(free)):
            chosen = dict(zip(free, bits))
            memo: dict[LTL, bool] = {}

            def member(f: LTL) -> bool:
                if f in memo:
                    return memo[f]
                if isinstance(f, LNot):
                    v = not member(f.arg)
                elif isinstance(f, LTrue):
                    v = True
                elif isinstance(f, LAnd):
                    v = member(f.left) and member(f.right)
                else:
                    v = chosen[f]
                memo[f] = v
                return v

            yield frozenset(f for f in self.clo if member(f))

    def world_of(self, t: frozenset) -> World:
        return frozenset(p.index for p in t if isinstance(p, LProp))

    def is_initial(self, t: frozenset) -> bool:
        # at time 0 a since-formula holds exactly when its right side does
        for f in self.clo:
            if isinstance(f, LPrev) and f in t:
                return False
            if isinstance(f, LSince) and (f in t) != (f.right in t):
                return False
        return True

    def t_compatible(self, t1: frozenset, t2: frozenset) -> bool:
        for f in self.clo:
            if isinstance(f, LNext):
                if (f in t1) != (f.arg in t2):
                    return False
            elif isinstance(f, LPrev):
                if (f in t2) != (f.arg in t1):
                    return False
            elif isinstance(f, LSince):
                if (f in t2) != (f.right in t2 or (f.left in t2 and f in t1)):
                    return False
            elif isinstance(f, LUntil):
                if (f in t1) != (f.right in t1 or (f.left in t1 and f in t2)):
                    return False
        return True


_TS_CACHE: dict = {}


def type_system(fs: Iterable[LTL]) -> TypeSystem:
    key = frozenset(fs)
    ts = _TS_CACHE.get(key)
    if ts is None:
        if len(_TS_CACHE) > 2048:
            _TS_CACHE.clear()
        ts = _TS_CACHE[key] = TypeSystem(key)
    return ts


def enumerate_types(fs: Iterable[LTL]):
    return iter(TypeSystem(fs).types())


def is_initial(fs: Iterable[LTL], t: frozenset) -> bool:
    return TypeSystem(fs).is_initial(t)


def t_compatible(fs: Iterable[LTL], t1: frozenset, t2: frozenset) -> bool:
    return TypeSystem(fs).t_compatible(t1, t2)


# ---------------------------------------------------------------------------
# Lasso search over a restricted world pool
# ---------------------------------------------------------------------------


def _good_cycle_starts(ts: TypeSystem, nodes: list, succ) -> set:
    """Nodes that lie on some cycle discharging all their U-obligations.

    A closed walk from T can visit exactly the nodes of T's strongly connected
    component, so T qualifies iff its SCC is cyclic and, for every until
    formula in T, some SCC member contains the right-hand side.
    """
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = itertools.count()

    def strongconnect(v):
        work = [(v, iter(succ(v)))]
        index[v] = low[v] = next(counter)
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)

    for v in nodes:
        if v not in index:
            strongconnect(v)

    good: set = set()
    for comp in sccs:
        comp_set = set(comp)
        cyclic = len(comp) > 1 or any(w in comp_set for w in succ(comp[0]))
        if not cyclic:
            continue
        for t in comp:
            obligations = [f for f in t if isinstance(f, LUntil)]
            if all(any(f.right in u for u in comp) for f in obligations):
                good.add(t)
    return good


def restricted_sat(phi: LTL, allowed_worlds: Iterable[World],
                   prefix: tuple, eval_at: Optional[int] = None):
    """Does an LTL structure over `allowed_worlds` exist that starts with the
    given prefix of worlds and satisfies phi at position eval_at?

    eval_at defaults to the last prefix position (len(prefix) - 1, i.e. the
    current time point n); an empty prefix evaluates at 0.  Returns
    (bool, witness) where the witness is (stem types, cycle types) on success.
    """
    allowed = frozenset(allowed_worlds)
    n = len(prefix) - 1
    if eval_at is None:
        eval_at = max(n, 0)
    pool_props = set().union(*allowed, set()) | props_of(expand(phi))
    ts = type_system([phi] + [LProp(i) for i in sorted(pool_props)])
    phi_x = expand(phi)
    nodes = [t for t in ts.types() if ts.world_of(t) in allowed]
    succ_map: dict = {}

    def succ(t):
        hit = succ_map.get(t)
        if hit is None:
            hit = succ_map[t] = [u for u in nodes if ts.t_compatible(t, u)]
        return hit

    good = _good_cycle_starts(ts, nodes, succ)
    if not good:
        return False, None

    # layered search over prefix positions, then reach a good cycle start
    layers: list[list] = []
    cur = [t for t in nodes if ts.is_initial(t)
           and (not prefix or ts.world_of(t) == prefix[0])
           and (eval_at != 0 or phi_x in t)]
    layers.append(cur)
    for i in range(1, len(prefix)):
        nxt = []
        for t in set().union(*(set(succ(u)) for u in layers[-1]), set()):
            if ts.world_of(t) == prefix[i] and (i != eval_at or phi_x in t):
                nxt.append(t)
        layers.append(nxt)
    if not layers[-1]:
        return False, None

    # From any type in the last layer, find a path to a good cycle start.
    # (For an empty prefix the initial layer already handled eval_at = 0.)
    from collections import deque

    start_set = set(layers[-1])
    parent: dict = {t: None for t in start_set}
    queue = deque(start_set)
    target = None
    while queue:
        t = queue.popleft()
        if t in good:
            target = t
            break
        for u in succ(t):
            if u not in parent:
                parent[u] = t
                queue.append(u)
    if target is None:
        return False, None

    # reconstruct stem from prefix layers + BFS path, then a concrete cycle;
    # the cycle starts at the target, so the stem stops right before it
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    stem_prefix = _reconstruct_layer_path(ts, layers, succ, path[0])
    stem = stem_prefix[:-1] + path[:-1]
    cycle = _concrete_cycle(ts, target, succ)
    return True, (tuple(stem), tuple(cycle))


def _reconstruct_layer_path(ts, layers, succ, last):
    path = [last]
    for i in range(len(layers) - 2, -1, -1):
        prev = next(t for t in layers[i] if path[0] in succ(t))
        path.insert(0, prev)
    return path


def _concrete_cycle(ts, start, succ):
    """A closed walk from start through its SCC covering all U-discharges."""
    comp = _scc_of(start, succ)
    obligations = [f.right for f in start if isinstance(f, LUntil)]
    targets = []
    for ob in obligations:
        node = next((u for u in comp if ob in u), None)
        if node is not None:
            targets.append(node)
    walk = [start]
    for tgt in targets:
        walk.extend(_path_within(walk[-1], tgt, comp, succ)[1:])
    walk.extend(_path_within(walk[-1], start, comp, succ)[1:])
    if len(walk) == 1:
        walk.append(start)
    return walk[:-1]


def _scc_of(v, succ):
    reach_fwd = _reach(v, succ)
    return {u for u in reach_fwd if v in _reach(u, succ)}


def _reach(v, succ):
    seen = {v}
    stack = [v]
    while stack:
        t = stack.pop()
        for u in succ(t):
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def _path_within(a, b, comp, succ):
    from collections import deque

    if a == b:
        # shortest nontrivial return path
        queue = deque((u, [a, u]) for u in succ(a) if u in comp)
        seen = set()
        while queue:
            node, path = queue.popleft()
            if node == b:
                return path
            if node in seen:
                continue
            seen.add(node)
            for u in succ(node):
                if u in comp:
                    queue.append((u, path + [u]))
        return [a]
    queue = deque([[a]])
    seen = {a}
    while queue:
        path = queue.popleft()
        if path[-1] == b:
            return path
        for u in succ(path[-1]):
            if u in comp and u not in seen:
                seen.add(u)
                queue.append(path + [u])
    raise AssertionError("no path inside an SCC")


# ---------------------------------------------------------------------------
# Separated decomposition
# ---------------------------------------------------------------------------


def _polarity(f: LTL) -> tuple[bool, bool]:
    """(has future op, has past op) anywhere in f."""
    fut = isinstance(f, (LNext, LUntil))
    pst = isinstance(f, (LPrev, LSince))
    for c in _children(f):
        cf, cp = _polarity(c)
        fut |= cf
        pst |= cp
    return fut, pst


@dataclass(frozen=True)
class SeparatedDecomposition:
    top_future: frozenset        # future units and their negations, plus props
    top_past: frozenset          # past units and their negations, plus props
    units: tuple                 # the abstracted top-level formulas, in order
    boolean_abstraction: object  # callable-free structure: LTL over unit slots
    valuations: tuple            # tuple of dict unit -> bool with pba true
    prop_count: int

    def future_set(self, v: dict) -> frozenset:
        out = set()
        for u in self.units:
            fut, pst = _polarity(u)
            if fut or not pst:  # future units and bare props
                out.add(u if v[u] else neg(u))
        return frozenset(out)

    def past_set(self, v: dict) -> frozenset:
        out = set()
        for u in self.units:
            fut, pst = _polarity(u)
            if pst or not fut:  # past units and bare props
                out.add(u if v[u] else neg(u))
        return frozenset(out)


def decompose_separated(pa: LTL, prop_count: Optional[int] = None
                        ) -> SeparatedDecomposition:
    """Split a separated formula into top-level future/past parts plus a
    Boolean abstraction; raises NotSeparated when past and future mix."""
    f = expand(pa)
    m = prop_count if prop_count is not None else (max(props_of(f), default=0))

    units: list[LTL] = []

    def scan(node: LTL):
        if isinstance(node, (LNext, LPrev, LUntil, LSince, LProp)):
            fut, pst = _polarity(node)
            if fut and pst:
                raise NotSeparated(str(node))
            if node not in units:
                units.append(node)
            return
        if isinstance(node, LTrue):
            return
        for c in _children(node):
            scan(c)

    scan(f)
    for i in range(1, m + 1):
        if LProp(i) not in units:
            units.append(LProp(i))

    def pba_eval(node: LTL, v: dict) -> bool:
        if node in v:
            return v[node]
        if isinstance(node, LTrue):
            return True
        if isinstance(node, LNot):
            return not pba_eval(node.arg, v)
        if isinstance(node, LAnd):
            return pba_eval(node.left, v) and pba_eval(node.right, v)
        raise AssertionError(node)

    vals = []
    for bits in itertools.product((False, True), repeat=len(units)):
        v = dict(zip(units, bits))
        if pba_eval(f, v):
            vals.append(v)

    future = frozenset(u for u in units if not _polarity(u)[1])
    past = frozenset(u for u in units if not _polarity(u)[0])
    return SeparatedDecomposition(
        top_future=future | frozenset(neg(u) for u in future),
        top_past=past | frozenset(neg(u) for u in past),
        units=tuple(units),
        boolean_abstraction=f,
        valuations=tuple(vals),
        prop_count=m,
    )


_ATMFUT_CACHE: dict = {}


def atmfut(allowed_worlds: Iterable[World], v: dict,
           decomp: SeparatedDecomposition) -> frozenset:
    """Worlds that can start an LTL model of the induced future set,
    restricted to the allowed pool."""
    fv = decomp.future_set(v)
    key = (fv, frozenset(allowed_worlds))
    hit = _ATMFUT_CACHE.get(key)
    if hit is not None:
        return hit
    conj: LTL = LTrue()
    for f in sorted(fv, key=str):
        conj = LAnd(conj, f)
    out = set()
    for w in frozenset(allowed_worlds):
        ok, _ = restricted_sat(conj, allowed_worlds, (w,), 0)
        if ok:
            out.add(w)
    if len(_ATMFUT_CACHE) > 10_000:
        _ATMFUT_CACHE.clear()
    _ATMFUT_CACHE[key] = frozenset(out)
    return frozenset(out)


def past_check(prefix: tuple, v: dict, decomp: SeparatedDecomposition) -> bool:
    """Types T_0..T_n exist: T_0 initial, chain t-compatible, worlds match the
    prefix, and the induced past set is contained in T_n."""
    pv = decomp.past_set(v)
    ts = type_system(list(decomp.top_past) + [LProp(i) for i in
                                              range(1, decomp.prop_count + 1)])
    layer = [t for t in ts.types() if ts.is_initial(t)
             and ts.world_of(t) == prefix[0]]
    for w in prefix[1:]:
        layer = [u for u in ts.types() if ts.world_of(u) == w
                 and any(ts.t_compatible(t, u) for t in layer)]
        if not layer:
            return False
    return any(pv <= t for t in layer)
