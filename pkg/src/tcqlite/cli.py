"""File formats and the command-line surface.

Line-oriented ontology/ABox-sequence formats and an expression grammar for
temporal queries; see README for the grammar.  All output is deterministic
byte-for-byte given identical inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import boolkrom, dllite, ltl, oracle, rewrite, solver
from .errors import (BoundsTooLarge, EmptySequence, FragmentViolation,
                     NotSeparated, ParseError, TcqError, UnknownName)
from .model import (
    And, Atomic, BasicConcept, CQ, ConceptAssertion, ConceptAtom,
    ConceptInclusion, Eventually, Exists, FalseQ, Globally, Historically,
    Iff, Implies, Ind, KB, Leaf, Next, Not, Once, Ontology, Or, Prev, Role,
    RoleAssertion, RoleAtom, RoleInclusion, Signature, TCQ, TKB, TrueQ,
    Until, Since, Var, abox, ground_tcq, tcq_free_vars, validate_tkb,
    validate_tcq,
)

KEYWORDS = {"EX", "true", "false", "X", "Y", "U", "S", "F", "G", "P", "H",
            "exists", "top", "bot"}


# ---------------------------------------------------------------------------
# Ontology format
# ---------------------------------------------------------------------------


def _parse_basic(tok: str, line: int, col: int) -> BasicConcept:
    tok = tok.strip()
    if tok.startswith("exists "):
        r = tok[len("exists "):].strip()
        return Exists(_parse_role(r))
    if not tok or " " in tok:
        raise ParseError(line, col, "basic concept")
    return Atomic(tok)


def _parse_role(tok: str) -> Role:
    tok = tok.strip()
    if tok.endswith("-"):
        return Role(tok[:-1], True)
    return Role(tok)


def parse_ontology(text: str) -> tuple[Ontology, Signature]:
    concepts: set[str] = set()
    roles: set[str] = set()
    rigid_c: set[str] = set()
    rigid_r: set[str] = set()
    cis: list[ConceptInclusion] = []
    ris: list[RoleInclusion] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("rigid concept "):
            name = line[len("rigid concept "):].strip()
            concepts.add(name)
            rigid_c.add(name)
        elif line.startswith("concept "):
            concepts.add(line[len("concept "):].strip())
        elif line.startswith("rigid role "):
            name = line[len("rigid role "):].strip()
            roles.add(name)
            rigid_r.add(name)
        elif line.startswith("role "):
            roles.add(line[len("role "):].strip())
        elif "<=" in line:
            lhs_txt, rhs_txt = line.split("<=", 1)
            lhs_txt = lhs_txt.strip()
            lhs: list[BasicConcept] = []
            if lhs_txt and lhs_txt != "top":
                for part in lhs_txt.split(","):
                    lhs.append(_parse_basic(part, ln, raw.index(part.strip()) + 1))
            rhs_txt = rhs_txt.strip()
            if rhs_txt == "bot":
                rhs: tuple = ()
            else:
                rhs = tuple(_parse_basic(p, ln, 1) for p in rhs_txt.split("|"))
            cis.append(ConceptInclusion(frozenset(lhs), rhs))
        elif "<" in line:
            sub_txt, sup_txt = line.split("<", 1)
            ris.append(RoleInclusion(_parse_role(sub_txt), _parse_role(sup_txt)))
        else:
            raise ParseError(ln, 1, "ontology declaration or axiom")
    sig = Signature(frozenset(concepts), frozenset(roles), frozenset(),
                    frozenset(rigid_c), frozenset(rigid_r))
    return Ontology(frozenset(cis), frozenset(ris)), sig


def print_basic(b: BasicConcept) -> str:
    if isinstance(b, Atomic):
        return b.name
    return f"exists {b.role.name}" + ("-" if b.role.inverted else "")


def print_ontology(o: Ontology, sig: Signature) -> str:
    lines = []
    for c in sorted(sig.concept_names):
        lines.append(("rigid concept " if c in sig.rigid_concepts
                      else "concept ") + c)
    for r in sorted(sig.role_names):
        lines.append(("rigid role " if r in sig.rigid_roles else "role ") + r)
    for c in sorted(o.cis, key=str):
        lhs = ", ".join(sorted(print_basic(b) for b in c.lhs)) or "top"
        rhs = " | ".join(print_basic(b) for b in c.rhs) or "bot"
        lines.append(f"{lhs} <= {rhs}")
    for r in sorted(o.ris, key=str):
        sub = r.sub.name + ("-" if r.sub.inverted else "")
        sup = r.sup.name + ("-" if r.sup.inverted else "")
        lines.append(f"{sub} < {sup}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ABox-sequence format
# ---------------------------------------------------------------------------


def _parse_assertion(tok: str, ln: int):
    tok = tok.strip()
    positive = True
    if tok.startswith("!"):
        positive = False
        tok = tok[1:].strip()
    if "(" not in tok or not tok.endswith(")"):
        raise ParseError(ln, 1, "assertion")
    head, args_txt = tok[:-1].split("(", 1)
    head = head.strip()
    args = [a.strip() for a in args_txt.split(",")]
    if len(args) == 1:
        return ConceptAssertion(_parse_basic(head, ln, 1), args[0], positive)
    if len(args) == 2:
        return RoleAssertion(_parse_role(head), args[0], args[1],
                             positive).normalized()
    raise ParseError(ln, 1, "one or two arguments")


def parse_tkb(text: str, ontology: Ontology, sig: Signature,
              horn: bool = True) -> TKB:
    sections: dict[int, list] = {}
    current: Optional[int] = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            head, _, rest = line.partition(":")
            try:
                idx = int(head[1:].strip())
            except ValueError:
                raise ParseError(ln, 1, "time point index") from None
            current = idx
            sections.setdefault(idx, [])
            for part in rest.split(","):
                if part.strip():
                    sections[idx].append(_parse_assertion(part, ln))
        else:
            if current is None:
                raise ParseError(ln, 1, "a section header @<i>:")
            for part in line.split(","):
                if part.strip():
                    sections[current].append(_parse_assertion(part, ln))
    if not sections:
        raise EmptySequence("no @<i> sections found")
    top = max(sections)
    aboxes = tuple(abox(*sections.get(i, [])) for i in range(top + 1))
    return validate_tkb(TKB(ontology, aboxes, sig), horn=horn)


def print_tkb(tkb: TKB) -> str:
    lines = []
    for i, a in enumerate(tkb.aboxes):
        lines.append(f"@{i}:")
        for assn in sorted(a, key=str):
            lines.append("  " + print_assertion(assn))
    return "\n".join(lines) + "\n"


def print_assertion(a) -> str:
    neg = "" if a.positive else "!"
    if isinstance(a, ConceptAssertion):
        return f"{neg}{print_basic(a.concept)}({a.individual})"
    na = a.normalized()
    return f"{neg}{na.role.name}({na.subj},{na.obj})"


# ---------------------------------------------------------------------------
# Temporal query format
# ---------------------------------------------------------------------------


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, str, int, int]] = []
        ln, col = 1, 1
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "\n":
                ln += 1
                col = 1
                i += 1
                continue
            if ch.isspace():
                col += 1
                i += 1
                continue
            if ch == "#":
                while i < len(text) and text[i] != "\n":
                    i += 1
                continue
            two = text[i:i + 3]
            if two == "<->":
                self.toks.append(("op", "<->", ln, col))
                i += 3
                col += 3
                continue
            if text[i:i + 2] == "->":
                self.toks.append(("op", "->", ln, col))
                i += 2
                col += 2
                continue
            if ch in "()!&|,.=":
                self.toks.append(("punct", ch, ln, col))
                i += 1
                col += 1
                continue
            if ch.isalnum() or ch in "_?-@[":
                j = i
                while j < len(text) and (text[j].isalnum()
                                         or text[j] in "_?-@[]:"):
                    j += 1
                word = text[i:j]
                self.toks.append(("word", word, ln, col))
                col += j - i
                i = j
                continue
            raise ParseError(ln, col, f"token (got {ch!r})")
        self.pos = 0

    def peek(self):
        if self.pos < len(self.toks):
            return self.toks[self.pos]
        return ("eof", "", 0, 0)

    def next(self):
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, value: str):
        kind, v, ln, col = self.next()
        if v != value:
            raise ParseError(ln, col, repr(value))


def parse_tcq(text: str) -> TCQ:
    toks = _Tokens(text)
    q = _parse_iff(toks)
    kind, v, ln, col = toks.peek()
    if kind != "eof":
        raise ParseError(ln, col, "end of query")
    return q


def _parse_iff(toks) -> TCQ:
    left = _parse_implies(toks)
    while toks.peek()[1] == "<->":
        toks.next()
        left = Iff(left, _parse_implies(toks))
    return left


def _parse_implies(toks) -> TCQ:
    left = _parse_or(toks)
    if toks.peek()[1] == "->":
        toks.next()
        return Implies(left, _parse_implies(toks))
    return left


def _parse_or(toks) -> TCQ:
    left = _parse_and(toks)
    while toks.peek()[1] == "|":
        toks.next()
        left = Or(left, _parse_and(toks))
    return left


def _parse_and(toks) -> TCQ:
    left = _parse_temporal(toks)
    while toks.peek()[1] == "&":
        toks.next()
        left = And(left, _parse_temporal(toks))
    return left


def _parse_temporal(toks) -> TCQ:
    left = _parse_unary(toks)
    kind, v, ln, col = toks.peek()
    if kind == "word" and v in ("U", "S"):
        toks.next()
        right = _parse_temporal(toks)
        return Until(left, right) if v == "U" else Since(left, right)
    return left


_UNARY_OPS = {"!": Not, "X": Next, "Y": Prev, "F": Eventually,
              "G": Globally, "P": Once, "H": Historically}


def _parse_unary(toks) -> TCQ:
    kind, v, ln, col = toks.peek()
    if v == "!" or (kind == "word" and v in _UNARY_OPS):
        toks.next()
        return _UNARY_OPS[v](_parse_unary(toks))
    return _parse_primary(toks)


def _parse_primary(toks) -> TCQ:
    kind, v, ln, col = toks.peek()
    if v == "(":
        toks.next()
        q = _parse_iff(toks)
        toks.expect(")")
        return q
    if v == "true":
        toks.next()
        return TrueQ()
    if v == "false":
        toks.next()
        return FalseQ()
    if v == "EX":
        toks.next()
        bound = [_expect_word(toks)]
        while toks.peek()[1] == ",":
            toks.next()
            bound.append(_expect_word(toks))
        toks.expect(".")
        atoms = [_parse_atom(toks, set(bound))]
        while _looks_like_atom_after_amp(toks):
            toks.next()  # the &
            atoms.append(_parse_atom(toks, set(bound)))
        return Leaf(CQ(frozenset(atoms), _free_vars_of(atoms, set(bound))))
    if kind == "word":
        atom = _parse_atom(toks, set())
        return Leaf(CQ(frozenset({atom}), _free_vars_of([atom], set())))
    raise ParseError(ln, col, "a query")


def _free_vars_of(atoms, bound: set) -> tuple:
    from .model import atom_terms
    out = []
    for a in atoms:
        for t in atom_terms(a):
            if isinstance(t, Var) and t.name not in bound \
                    and t.name not in out:
                out.append(t.name)
    return tuple(sorted(out))


def _expect_word(toks) -> str:
    kind, v, ln, col = toks.next()
    if kind != "word":
        raise ParseError(ln, col, "a name")
    return v


def _looks_like_atom_after_amp(toks) -> bool:
    if toks.peek()[1] != "&":
        return False
    save = toks.pos
    toks.next()
    kind, v, ln, col = toks.peek()
    ok = kind == "word" and v not in KEYWORDS - {"exists"} and (
        v == "exists"
        or (toks.pos + 1 < len(toks.toks) and toks.toks[toks.pos + 1][1] == "("))
    toks.pos = save
    return ok


def _parse_atom(toks, bound: set):
    kind, v, ln, col = toks.next()
    if kind != "word":
        raise ParseError(ln, col, "an atom")
    if v == "exists":
        rkind, rname, rln, rcol = toks.next()
        if rkind != "word":
            raise ParseError(rln, rcol, "a role name")
        toks.expect("(")
        t = _parse_term(toks, bound)
        toks.expect(")")
        return ConceptAtom(Exists(_parse_role(rname)), t)
    toks.expect("(")
    t1 = _parse_term(toks, bound)
    if toks.peek()[1] == ",":
        toks.next()
        t2 = _parse_term(toks, bound)
        toks.expect(")")
        return RoleAtom(_parse_role(v), t1, t2)
    toks.expect(")")
    return ConceptAtom(_parse_basic(v, ln, col), t1)


def _parse_term(toks, bound: set):
    kind, v, ln, col = toks.next()
    if kind != "word":
        raise ParseError(ln, col, "a term")
    if v.startswith("?"):
        return Var(v[1:])
    if v in bound:
        return Var(v)
    return Ind(v)


def print_tcq(q: TCQ) -> str:
    if isinstance(q, Leaf):
        return _print_cq(q.cq)
    if isinstance(q, TrueQ):
        return "true"
    if isinstance(q, FalseQ):
        return "false"
    if isinstance(q, Not):
        return f"!({print_tcq(q.arg)})"
    unary = {Next: "X", Prev: "Y", Eventually: "F", Globally: "G",
             Once: "P", Historically: "H"}
    for cls, op in unary.items():
        if isinstance(q, cls):
            return f"{op} ({print_tcq(q.arg)})"
    binop = {And: "&", Or: "|", Implies: "->", Iff: "<->",
             Until: "U", Since: "S"}
    for cls, op in binop.items():
        if isinstance(q, cls):
            return f"({print_tcq(q.left)}) {op} ({print_tcq(q.right)})"
    raise TypeError(q)


def _print_cq(cq: CQ) -> str:
    def term(t):
        if isinstance(t, Ind):
            return t.name
        return t.name if t.name in cq.quantified_vars() else f"?{t.name}"

    parts = []
    for a in sorted(cq.atoms, key=str):
        if isinstance(a, ConceptAtom):
            parts.append(f"{print_basic(a.concept)}({term(a.term)})")
        else:
            parts.append(f"{a.role.name}({term(a.subj)},{term(a.obj)})")
    body = " & ".join(parts) if parts else "true"
    qvars = sorted(cq.quantified_vars())
    if qvars:
        return f"(EX {', '.join(qvars)} . {body})"
    return f"({body})" if parts else "true"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load(args):
    with open(args.ontology, encoding="utf-8") as fh:
        onto, sig = parse_ontology(fh.read())
    with open(args.tkb, encoding="utf-8") as fh:
        tkb = parse_tkb(fh.read(), onto, sig)
    q = None
    if getattr(args, "query", None):
        with open(args.query, encoding="utf-8") as fh:
            q = parse_tcq(fh.read())
        validate_tcq(q, tkb, strict=args.strict)
    return tkb, q


def _report(lines: list[tuple[str, object]], as_json: bool) -> str:
    if as_json:
        return json.dumps(dict(lines), sort_keys=True)
    out = [str(lines[0][1])]
    for k, v in lines[1:]:
        out.append(f"{k}: {v}")
    return "\n".join(out)


def _world_str(w: frozenset) -> str:
    return "{" + ",".join(f"p{j}" for j in sorted(w)) + "}"


def _run_sat(args, mode: str) -> int:
    tkb, q = _load(args)
    query = q if mode == "sat" else None
    from .model import negate
    target = q if mode == "sat" else negate(q)

    solver_res = rewrite_res = None
    if args.engine in ("solver", "both"):
        solver_res = solver.satisfiable(target, tkb, max_work=args.max_work,
                                        jobs=args.jobs)
    if args.engine in ("rewrite", "both"):
        try:
            rewrite_res = rewrite.rewriting_satisfiable(target, tkb)
        except NotSeparated:
            if args.engine == "rewrite":
                print("ERROR: propositional abstraction is not separated; "
                      "use --engine solver", file=sys.stderr)
                return 1
            rewrite_res = None

    if args.engine == "both" and solver_res is not None \
            and rewrite_res is not None \
            and solver_res.satisfiable is not None \
            and solver_res.satisfiable != rewrite_res.satisfiable:
        print("ERROR: engine mismatch (solver vs rewrite)", file=sys.stderr)
        return 1

    res = solver_res if solver_res is not None else None
    sat = None
    engine = args.engine
    if solver_res is not None and solver_res.satisfiable is not None:
        sat = solver_res.satisfiable
    elif rewrite_res is not None:
        sat = rewrite_res.satisfiable
        engine = "rewrite"

    if sat is None:
        print(_report([("verdict", "UNKNOWN"), ("engine", engine)], args.json))
        return 2
    if mode == "sat":
        verdict = "SAT" if sat else "UNSAT"
    else:
        verdict = "NOT-ENTAILED" if sat else "ENTAILED"
    lines: list[tuple[str, object]] = [("verdict", verdict), ("engine", engine)]
    if solver_res is not None and solver_res.certificate is not None:
        cert = solver_res.certificate
        lines.append(("worlds", " ".join(_world_str(w) for w in cert.worlds)))
        lines.append(("q_r", ",".join(map(str, sorted(cert.tup.q_r)))))
        lines.append(("q_rn", ",".join(map(str, sorted(cert.tup.q_rn)))))
        lines.append(("r_f", ",".join(sorted(print_assertion(a)
                                             for a in cert.tup.r_f))))
    print(_report(lines, args.json))
    return 0


def _run_consistent(args) -> int:
    tkb, _ = _load(args)
    lines: list[tuple[str, object]] = []
    all_ok = True
    for i in range(tkb.n + 1):
        ok = dllite.is_consistent(KB(tkb.ontology, tkb.abox_at(i)))
        all_ok &= ok
        lines.append((f"time_{i}", "consistent" if ok else "inconsistent"))
    lines.insert(0, ("verdict", "CONSISTENT" if all_ok else "INCONSISTENT"))
    print(_report(lines, args.json))
    return 0


def _run_answers(args) -> int:
    tkb, q = _load(args)
    free = sorted(tcq_free_vars(q))
    inds = sorted(tkb.individuals())
    import itertools as it
    hits = []
    for combo in it.product(inds, repeat=len(free)):
        g = dict(zip(free, combo))
        res = solver.entails(ground_tcq(q, g), tkb, max_work=args.max_work)
        if res is None:
            print(_report([("verdict", "UNKNOWN")], args.json))
            return 2
        if res:
            hits.append(combo)
    lines: list[tuple[str, object]] = [("verdict", "ANSWERS"),
                                       ("variables", ",".join(free))]
    for combo in sorted(hits):
        lines.append(("answer", ",".join(combo)))
    print(_report(lines, args.json))
    return 0


def _run_rewrite(args) -> int:
    tkb, q = _load(args)
    from .model import normalize_tcq, propositional_abstraction
    phi_n = normalize_tcq(q)
    pa, cq_list = propositional_abstraction(phi_n)
    out = []
    for j, cq in enumerate(cq_list, start=1):
        f = rewrite.pref(cq, tkb.ontology).at(rewrite.TVar("i"))
        out.append(f"; pref of leaf {j}")
        out.append(rewrite.to_sexpr(f))
        if args.sql:
            out.append(rewrite.to_sqlish(f))
    quf = rewrite.q_unsat_fo(tkb.ontology, tkb.signature, rewrite.TVar("i"))
    out.append("; inconsistency rewriting")
    out.append(rewrite.to_sexpr(quf))
    if args.sql:
        out.append(rewrite.to_sqlish(quf))
    print("\n".join(out))
    return 0


def _run_bool2krom(args) -> int:
    with open(args.ontology, encoding="utf-8") as fh:
        onto, sig = parse_ontology(fh.read())
    with open(args.tkb, encoding="utf-8") as fh:
        tkb = parse_tkb(fh.read(), onto, sig, horn=False)
    with open(args.query, encoding="utf-8") as fh:
        q = parse_tcq(fh.read())
    q2, tkb2 = boolkrom.reduce_bool_to_krom(q, tkb, mode=args.mode)
    print("# krom ontology (not consumable by the horn reasoner)")
    print(print_ontology(tkb2.ontology, tkb2.signature), end="")
    print("# query")
    print(print_tcq(q2))
    return 0


def _run_oracle(args) -> int:
    tkb, q = _load(args)
    try:
        lasso = oracle.bounded_tcq_sat(q, tkb, args.domain, args.stem,
                                       args.cycle)
    except BoundsTooLarge as e:
        print(_report([("verdict", "UNKNOWN"), ("reason", str(e))], args.json))
        return 2
    if lasso is None:
        print(_report([("verdict", "UNKNOWN"),
                       ("reason", "no model within bounds")], args.json))
        return 2
    print(_report([("verdict", "SAT"),
                   ("stem", len(lasso.stem)), ("cycle", len(lasso.cycle)),
                   ("domain", len(lasso.stem[0].domain))], args.json))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tcq",
        description="Temporal conjunctive query reasoning over DL-Lite "
                    "knowledge bases with rigid names")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_query=True):
        sp.add_argument("ontology")
        sp.add_argument("tkb")
        if with_query:
            sp.add_argument("query")
        sp.add_argument("--json", action="store_true")
        sp.add_argument("--strict", action="store_true",
                        help="require declared names and ABox individuals")
        sp.add_argument("--max-work", type=int, default=2_000_000)
        sp.add_argument("--jobs", type=int, default=1)

    for name in ("sat", "entail"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--engine", choices=("solver", "rewrite", "both"),
                        default="solver")

    sp = sub.add_parser("consistent")
    common(sp, with_query=False)

    sp = sub.add_parser("answers")
    common(sp)

    sp = sub.add_parser("rewrite")
    common(sp)
    sp.add_argument("--sql", action="store_true",
                    help="additionally print SELECT/EXISTS-style text")

    sp = sub.add_parser("bool2krom")
    common(sp)
    sp.add_argument("--mode", choices=("entail", "sat"), default="entail")

    sp = sub.add_parser("oracle")
    common(sp)
    sp.add_argument("--domain", type=int, default=2)
    sp.add_argument("--stem", type=int, default=3)
    sp.add_argument("--cycle", type=int, default=2)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("sat", "entail"):
            return _run_sat(args, args.command)
        if args.command == "consistent":
            return _run_consistent(args)
        if args.command == "answers":
            return _run_answers(args)
        if args.command == "rewrite":
            return _run_rewrite(args)
        if args.command == "bool2krom":
            return _run_bool2krom(args)
        if args.command == "oracle":
            return _run_oracle(args)
        raise AssertionError(args.command)
    except ParseError as e:
        print(f"ERROR: parse: {e}", file=sys.stderr)
        return 1
    except (UnknownName, FragmentViolation, EmptySequence) as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except BoundsTooLarge as e:
        print(f"UNKNOWN: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
