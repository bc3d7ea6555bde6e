"""Line-oriented MLN text format.

::

    domain Person = 10            // or: domain Person = {a, b, c}
    predicate smokes(Person)
    predicate friends(Person, Person)
    1.3  smokes(X) => cancer(X)
    hard friends(X,X)
    1.2  X != Y, friends(X,Y) => friends(Y,X)
    evidence !friends(a,b)

Connectives by increasing binding strength: ``<=>``, ``=>`` (right
associative), ``v``, ``^``, ``!``. Constants are lowercase identifiers and
logical variables uppercase. A domain given by size is filled with the
constants that the model mentions for it, then padded with generated names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .mln import (
    HARD,
    And,
    Atom,
    Body,
    Comparison,
    Constraint,
    DomainDecl,
    Iff,
    Implies,
    Literal,
    Mln,
    Not,
    Or,
    PredicateDecl,
    PredicateId,
    Var,
    WeightedFormula,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=>|=>|!=|[=!^(),{}])
    """,
    re.VERBOSE,
)

KEYWORDS = {"domain", "predicate", "evidence", "hard"}


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(line: str, lineno: int) -> list[_Tok]:
    out: list[_Tok] = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None:
            raise ParseError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    return out


def _strip_comment(line: str) -> str:
    i = line.find("//")
    return line if i < 0 else line[:i]


class _LineParser:
    def __init__(self, toks: list[_Tok], lineno: int, preds: dict[str, PredicateDecl]):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.preds = preds
        self.var_domains: dict[str, str] = {}
        # (constant, domain) in order of mention
        self.mentions: list[tuple[str, str, int]] = []

    # -- token helpers
    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        col = tok.col if tok else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        return ParseError(msg, self.lineno, col)

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of line")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text and tok.kind == "op"

    def done(self) -> bool:
        return self.i >= len(self.toks)

    # -- grammar
    def term(self) -> tuple[str, _Tok]:
        tok = self.next()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected a constant or variable, found {tok.text!r}", tok)
        return tok.text, tok

    def bind(self, name: str, domain: str, tok: _Tok):
        if name[0].isupper():
            prev = self.var_domains.setdefault(name, domain)
            if prev != domain:
                raise ModelParseError(
                    f"variable {name} used with domains {prev} and {domain}", self.lineno, tok.col
                )
            return Var(name, domain)
        self.mentions.append((name, domain, tok.col))
        return name

    def atom(self) -> Atom:
        tok = self.next()
        if tok.kind != "ident" or not tok.text[0].islower() or tok.text in KEYWORDS:
            raise self.error(f"expected a predicate, found {tok.text!r}", tok)
        decl = self.preds.get(tok.text)
        if decl is None:
            raise ParseError(f"undeclared predicate {tok.text!r}", self.lineno, tok.col)
        raw: list[tuple[str, _Tok]] = []
        if self.at("("):
            self.next()
            if not self.at(")"):
                raw.append(self.term())
                while self.at(","):
                    self.next()
                    raw.append(self.term())
            self.expect(")")
        if len(raw) != decl.arity:
            raise ParseError(
                f"predicate {decl.name} has arity {decl.arity}, got {len(raw)} arguments",
                self.lineno,
                tok.col,
            )
        args = tuple(self.bind(name, dom, t) for (name, t), dom in zip(raw, decl.domains))
        return Atom(PredicateId(decl.name), args)

    def primary(self) -> Body:
        if self.at("("):
            self.next()
            inner = self.iff()
            self.expect(")")
            return inner
        return self.atom()

    def unary(self) -> Body:
        if self.at("!"):
            self.next()
            return Not(self.unary())
        return self.primary()

    def conj(self) -> Body:
        parts = [self.unary()]
        while self.at("^"):
            self.next()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def _at_or(self) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "ident" and tok.text == "v"

    def disj(self) -> Body:
        parts = [self.conj()]
        while self._at_or():
            self.next()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def impl(self) -> Body:
        left = self.disj()
        if self.at("=>"):
            self.next()
            return Implies(left, self.impl())
        return left

    def iff(self) -> Body:
        left = self.impl()
        while self.at("<=>"):
            self.next()
            left = Iff(left, self.impl())
        return left

    def _at_comparison(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a is not None and a.kind == "ident" and b is not None and b.text in ("=", "!=")

    def comparison_raw(self) -> tuple[str, _Tok, str, str, _Tok]:
        left, ltok = self.term()
        op = self.next().text
        right, rtok = self.term()
        return left, ltok, op, right, rtok

    def formula_tail(self) -> tuple[list, Body]:
        raw = []
        while self._at_comparison():
            raw.append(self.comparison_raw())
            self.expect(",")
        body = self.iff()
        if not self.done():
            raise self.error(f"unexpected token {self.peek().text!r}")
        return raw, body

    def resolve_constraint(self, raw) -> Constraint:
        comps = []
        for left, ltok, op, right, rtok in raw:
            terms = []
            for name, tok in ((left, ltok), (right, rtok)):
                if name[0].isupper():
                    if name not in self.var_domains:
                        raise ModelParseError(
                            f"constraint variable {name} does not occur in the formula",
                            self.lineno,
                            tok.col,
                        )
                    terms.append(Var(name, self.var_domains[name]))
                else:
                    terms.append((name, tok))
            if not any(isinstance(t, Var) for t in terms):
                raise ModelParseError("a constraint must mention a variable", self.lineno, ltok.col)
            a, b = terms
            if isinstance(a, Var) and isinstance(b, Var):
                if a.domain != b.domain:
                    raise ModelParseError(
                        f"cannot compare {a.name}:{a.domain} with {b.name}:{b.domain}",
                        self.lineno,
                        ltok.col,
                    )
            else:
                var = a if isinstance(a, Var) else b
                name, tok = b if isinstance(a, Var) else a
                self.mentions.append((name, var.domain, tok.col))
                a, b = var, name
            comps.append(Comparison.make(a, b, op == "="))
        return Constraint(frozenset(comps))


class ModelParseError(ParseError):
    """Well-formed text describing an ill-typed model."""


def parse_mln(text: str) -> Mln:
    """Parse model text into an :class:`Mln`. Raises :class:`ParseError`."""
    lines = [(n, _strip_comment(raw)) for n, raw in enumerate(text.splitlines(), start=1)]
    lines = [(n, line) for n, line in lines if line.strip()]
    tokenized = [(n, _tokenize(line, n)) for n, line in lines]

    domain_specs: dict[str, tuple[int, tuple[str, ...] | int]] = {}
    preds: dict[str, PredicateDecl] = {}
    pred_lines: dict[str, int] = {}
    body_lines = []
    for n, toks in tokenized:
        head = toks[0]
        if head.kind == "ident" and head.text == "domain":
            name, spec = _parse_domain(toks, n)
            if name in domain_specs:
                raise ParseError(f"domain {name} declared twice", n, toks[1].col)
            domain_specs[name] = (n, spec)
        elif head.kind == "ident" and head.text == "predicate":
            decl = _parse_predicate(toks, n)
            if decl.name in preds:
                raise ParseError(f"predicate {decl.name} declared twice", n, toks[1].col)
            preds[decl.name] = decl
            pred_lines[decl.name] = n
        else:
            body_lines.append((n, toks))

    for decl in preds.values():
        for dom in decl.domains:
            if dom not in domain_specs:
                raise ParseError(f"undeclared domain {dom!r} in predicate {decl.name}", pred_lines[decl.name], 1)

    formulas: list[WeightedFormula] = []
    evidence: list[Literal] = []
    mentions: list[tuple[str, str, int, int]] = []
    for n, toks in body_lines:
        p = _LineParser(toks, n, preds)
        head = p.next()
        if head.kind == "ident" and head.text == "evidence":
            positive = True
            if p.at("!"):
                p.next()
                positive = False
            start = p.i
            atom = p.atom()
            if not p.done():
                raise p.error(f"unexpected token {p.peek().text!r}")
            if atom.variables:
                bad = next(t for t in toks[start + 1 :] if t.kind == "ident" and t.text[0].isupper())
                raise ModelParseError("evidence must be ground", n, bad.col)
            evidence.append(Literal(atom, positive))
        else:
            if head.kind == "ident" and head.text == "hard":
                weight = HARD
            elif head.kind == "number":
                weight = float(head.text)
            else:
                raise ParseError(f"expected a declaration, weight or 'hard', found {head.text!r}", n, head.col)
            raw, body = p.formula_tail()
            constraint = p.resolve_constraint(raw)
            formulas.append(WeightedFormula(len(formulas) + 1, weight, body, constraint))
        mentions.extend((c, d, n, col) for c, d, col in p.mentions)

    domains = _build_domains(domain_specs, mentions)
    return Mln(tuple(domains), tuple(preds.values()), tuple(formulas), tuple(evidence))


def _parse_domain(toks: list[_Tok], n: int):
    if len(toks) < 4 or toks[1].kind != "ident" or toks[2].text != "=":
        raise ParseError("expected 'domain Name = size' or 'domain Name = {c1, ...}'", n, toks[0].col)
    name = toks[1].text
    if not name[0].isupper():
        raise ParseError(f"domain names are capitalized: {name!r}", n, toks[1].col)
    if toks[3].kind == "number":
        if len(toks) != 4 or not re.fullmatch(r"\d+", toks[3].text) or int(toks[3].text) < 1:
            raise ParseError("domain size must be a positive integer", n, toks[3].col)
        return name, int(toks[3].text)
    if toks[3].text != "{" or toks[-1].text != "}":
        raise ParseError("expected '{' constant list '}'", n, toks[3].col)
    inner = toks[4:-1]
    consts = []
    for j, tok in enumerate(inner):
        if j % 2 == 0:
            if tok.kind != "ident" or not tok.text[0].islower():
                raise ParseError(f"expected a lowercase constant, found {tok.text!r}", n, tok.col)
            consts.append(tok.text)
        elif tok.text != ",":
            raise ParseError(f"expected ',', found {tok.text!r}", n, tok.col)
    if not consts or len(inner) % 2 == 0:
        raise ParseError("malformed constant list", n, toks[3].col)
    if len(set(consts)) != len(consts):
        raise ParseError(f"domain {name} lists a constant twice", n, toks[3].col)
    return name, tuple(consts)


def _parse_predicate(toks: list[_Tok], n: int) -> PredicateDecl:
    if len(toks) < 2 or toks[1].kind != "ident" or not toks[1].text[0].islower() or toks[1].text in KEYWORDS:
        raise ParseError("expected 'predicate name(Domain, ...)'", n, toks[0].col)
    name = toks[1].text
    if name == "v":
        raise ParseError("'v' is reserved for disjunction", n, toks[1].col)
    rest = toks[2:]
    if not rest:
        return PredicateDecl(name, ())
    if rest[0].text != "(" or rest[-1].text != ")":
        raise ParseError("expected '(' domain list ')'", n, rest[0].col)
    inner = rest[1:-1]
    doms = []
    for j, tok in enumerate(inner):
        if j % 2 == 0:
            if tok.kind != "ident":
                raise ParseError(f"expected a domain name, found {tok.text!r}", n, tok.col)
            doms.append(tok.text)
        elif tok.text != ",":
            raise ParseError(f"expected ',', found {tok.text!r}", n, tok.col)
    if inner and len(inner) % 2 == 0:
        raise ParseError("malformed domain list", n, rest[0].col)
    return PredicateDecl(name, tuple(doms))


def _build_domains(specs, mentions) -> list[DomainDecl]:
    seen: dict[str, list[str]] = {name: [] for name in specs}
    for const, dom, n, col in mentions:
        if const not in seen[dom]:
            seen[dom].append(const)
    out = []
    for name, (n, spec) in specs.items():
        if isinstance(spec, tuple):
            for const, dom, ln, col in mentions:
                if dom == name and const not in spec:
                    raise ModelParseError(f"constant {const!r} is not in domain {name}", ln, col)
            out.append(DomainDecl(name, spec))
            continue
        consts = list(seen[name])
        if len(consts) > spec:
            raise ParseError(f"domain {name} has size {spec} but {len(consts)} constants are mentioned", n, 1)
        prefix = name.lower()
        k = 1
        while len(consts) < spec:
            cand = f"{prefix}{k}"
            if cand not in consts:
                consts.append(cand)
            k += 1
        out.append(DomainDecl(name, tuple(consts)))
    return out


# -- printing ----------------------------------------------------------------

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4, Not: 5}


def format_body(body: Body) -> str:
    if isinstance(body, Not):
        inner = body.arg
        s = format_body(inner)
        return "!" + (s if _PREC.get(type(inner), 9) >= 5 else f"({s})")
    if isinstance(body, (And, Or)):
        op = " ^ " if isinstance(body, And) else " v "
        mine = _PREC[type(body)]
        return op.join(_wrap(a, mine) for a in body.args)
    if isinstance(body, Implies):
        return f"{_wrap(body.left, 2)} => {_wrap(body.right, 2)}"
    if isinstance(body, Iff):
        # left-associative chains re-parse unparenthesized on the left only
        left = format_body(body.left) if isinstance(body.left, Iff) else _wrap(body.left, 1)
        return f"{left} <=> {_wrap(body.right, 1)}"
    return str(body)


def _wrap(child: Body, parent_prec: int) -> str:
    s = format_body(child)
    return f"({s})" if _PREC.get(type(child), 9) <= parent_prec else s


def format_weight(w) -> str:
    return "hard" if w is HARD else repr(float(w))


def format_formula(f: WeightedFormula) -> str:
    prefix = f"{f.constraint}, " if not f.constraint.is_trivial else ""
    return f"{format_weight(f.weight)} {prefix}{format_body(f.body)}"


def print_mln(mln: Mln) -> str:
    """Render ``mln`` in the text format accepted by :func:`parse_mln`."""
    out = []
    for d in mln.domains:
        out.append(f"domain {d.name} = {{{', '.join(d.constants)}}}")
    for p in mln.predicates:
        out.append(f"predicate {p.name}({', '.join(p.domains)})" if p.domains else f"predicate {p.name}")
    out.extend(format_formula(f) for f in mln.formulas)
    out.extend(f"evidence {lit}" for lit in mln.evidence)
    return "\n".join(out) + "\n"


def read_mln(path) -> Mln:
    with open(path, encoding="utf-8") as fh:
        return parse_mln(fh.read())
