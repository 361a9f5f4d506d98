"""Extended CONSTRUCT queries: parser, expression evaluator, evaluation.

Grammar (keywords case-insensitive)::

    query := "construct" "{" block "}" ("from" NAME)? "where" "{" block "}"
    block := (subject predicate-object-list "."?)*
    expr  := term | expr (+|-|*|/) expr | FN "(" expr ("," expr)* ")" | "(" expr ")"

Template objects are expressions; ``[ ... ]`` introduces a nested blank
node and ``;`` / ``,`` abbreviate repeated subjects and predicates.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .errors import EvalError, QueryError
from .numfmt import format_number
from .rdf import IRI, TYPE, Blank, Graph, Literal, Term, iri, term_text
from .store import Var, match_bgp

log = logging.getLogger(__name__)

# name -> (min arity, max arity or None)
FUNCTIONS = {
    "concat": (1, None),
    "str": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "abs": (1, 1),
}


@dataclass(frozen=True)
class Const:
    term: Term


@dataclass(frozen=True)
class VarRef:
    var: Var


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expression = Union[Const, VarRef, BinOp, Call]


@dataclass(frozen=True)
class Template:
    s: Union[IRI, Blank, Var]
    p: Union[IRI, Var]
    o: Expression


@dataclass
class Query:
    templates: list[Template]
    pattern: list[tuple]
    from_graph: Optional[str] = None
    text: str = field(default="", repr=False)

    def template_blanks(self) -> list[str]:
        labels = []
        for t in self.templates:
            for term in (t.s, t.o.term if isinstance(t.o, Const) else None):
                if isinstance(term, Blank) and term.label not in labels:
                    labels.append(term.label)
        return labels

    def constructed_types(self) -> list[IRI]:
        return [t.o.term for t in self.templates
                if t.p == TYPE and isinstance(t.o, Const) and isinstance(t.o.term, IRI)]


# --------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>\s"]*>)
  | (?P<var>\?[A-Za-z_]\w*)
  | (?P<blank>_:[A-Za-z0-9_]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<pname>(?:[A-Za-z][\w-]*)?:[A-Za-z0-9_][\w-]*)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<punct>[{}().;,\[\]+\-*/])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    pos: int
    line: int
    col: int


def tokenize(text: str, start: int = 0, lenient: bool = False) -> list[Token]:
    """Tokens from ``start``; with ``lenient`` an unknown character ends the
    stream (as a ``bad`` token) instead of raising, for embedded queries."""
    tokens = []
    pos = start
    line = text.count("\n", 0, start) + 1
    line_start = text.rfind("\n", 0, start) + 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if lenient:
                tokens.append(Token("bad", text[pos], pos, line, pos - line_start + 1))
                break
            raise QueryError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos, line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, text: str, start: int = 0, lenient: bool = False):
        self.text = text
        self.toks = tokenize(text, start, lenient)
        self.i = 0
        self.anon = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return QueryError(msg, tok.line, tok.col)

    def next(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def at(self, text) -> bool:
        return self.tok.kind in ("punct", "name") and self.tok.text.lower() == text

    def expect(self, text) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.next()

    def query(self) -> Query:
        start = self.tok.pos
        self.expect("construct")
        self.expect("{")
        templates = self.block(template=True)
        self.expect("}")
        from_graph = None
        if self.at("from"):
            self.next()
            tok = self.next()
            if tok.kind not in ("name", "pname", "iri"):
                raise self.error("expected graph name after 'from'", tok)
            from_graph = tok.text
        self.expect("where")
        self.expect("{")
        pattern = self.block(template=False)
        self.expect("}")
        end = self.toks[self.i - 1].pos + 1
        q = Query(templates, pattern, from_graph, self.text[start:end])
        self.check(q)
        return q

    def block(self, template: bool) -> list:
        out = []
        while not self.at("}") and self.tok.kind != "eof":
            subject = self.subject(out, template)
            self.predicate_objects(subject, out, template, closer="}")
            if self.at("."):
                self.next()
            elif not self.at("}"):
                raise self.error(f"expected '.' or '}}', found {self.tok.text!r}")
        return out

    def anon_node(self, template: bool):
        self.anon += 1
        return Blank(f"anon{self.anon}") if template else Var(f"_:anon{self.anon}")

    def subject(self, out, template):
        if self.at("["):
            self.next()
            node = self.anon_node(template)
            self.predicate_objects(node, out, template, closer="]")
            self.expect("]")
            return node
        tok = self.tok
        term = self.term()
        if isinstance(term, Literal):
            raise self.error("a literal cannot be a subject", tok)
        return term

    def predicate_objects(self, subject, out, template, closer):
        while True:
            pred = self.verb()
            while True:
                obj = self.object(out, template)
                if template:
                    out.append(Template(subject, pred, obj))
                else:
                    out.append((subject, pred, obj))
                if self.at(","):
                    self.next()
                    continue
                break
            if self.at(";"):
                while self.at(";"):
                    self.next()
                if self.at(".") or self.at(closer):
                    return
                continue
            return

    def verb(self):
        tok = self.tok
        if tok.kind == "name" and tok.text == "a":
            self.next()
            return TYPE
        term = self.term()
        if not isinstance(term, (IRI, Var)):
            raise self.error("predicate must be an IRI or variable", tok)
        return term

    def object(self, out, template):
        if self.at("["):
            self.next()
            node = self.anon_node(template)
            self.predicate_objects(node, out, template, closer="]")
            self.expect("]")
            return Const(node) if template else node
        if template:
            return self.expr()
        return self.term()

    def term(self) -> Union[Term, Var]:
        tok = self.next()
        k = tok.kind
        if k == "iri":
            return IRI(tok.text[1:-1])
        if k == "pname":
            prefix = tok.text.split(":", 1)[0]
            from .rdf import PREFIXES
            if prefix not in PREFIXES:
                raise self.error(f"unknown prefix {prefix!r}", tok)
            return iri(tok.text)
        if k == "var":
            return Var(tok.text[1:])
        if k == "blank":
            return Blank(tok.text[2:])
        if k == "string":
            return Literal(_unescape(tok.text))
        if k == "number":
            return Literal(float(tok.text))
        if k == "punct" and tok.text in "+-" and self.tok.kind == "number":
            num = float(self.next().text)
            return Literal(-num if tok.text == "-" else num)
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}", tok)

    # precedence climbing: additive < multiplicative < unary < primary
    def expr(self) -> Expression:
        left = self.mul()
        while self.tok.kind == "punct" and self.tok.text in "+-":
            op = self.next().text
            left = BinOp(op, left, self.mul())
        return left

    def mul(self) -> Expression:
        left = self.unary()
        while self.tok.kind == "punct" and self.tok.text in "*/":
            op = self.next().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expression:
        if self.tok.kind == "punct" and self.tok.text == "-":
            self.next()
            inner = self.unary()
            if isinstance(inner, Const) and isinstance(inner.term, Literal) and inner.term.is_number:
                return Const(Literal(-inner.term.value))
            return BinOp("-", Const(Literal(0.0)), inner)
        return self.primary()

    def primary(self) -> Expression:
        tok = self.tok
        if self.at("("):
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name" and self.toks[self.i + 1].text == "(":
            name = tok.text.lower()
            if name not in FUNCTIONS:
                raise self.error(f"unknown function {tok.text!r}", tok)
            self.next()
            self.next()
            args = [self.expr()]
            while self.at(","):
                self.next()
                args.append(self.expr())
            self.expect(")")
            lo, hi = FUNCTIONS[name]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise self.error(f"{name}() takes {lo}{'' if hi == lo else '+'} argument(s), got {len(args)}", tok)
            return Call(name, tuple(args))
        term = self.term()
        return VarRef(term) if isinstance(term, Var) else Const(term)

    def check(self, q: Query):
        pattern_vars = {t for triple in q.pattern for t in triple if isinstance(t, Var)}
        pattern_blanks = {t.label for triple in q.pattern for t in triple if isinstance(t, Blank)}
        for tmpl in q.templates:
            used = [t for t in (tmpl.s, tmpl.p) if isinstance(t, Var)] + list(_expr_vars(tmpl.o))
            for v in used:
                if v not in pattern_vars:
                    raise QueryError(f"template variable ?{v.name} does not occur in the where clause")
        clash = set(q.template_blanks()) & pattern_blanks
        if clash:
            raise QueryError(f"blank label _:{sorted(clash)[0]} used in both template and pattern")


def _unescape(text: str) -> str:
    import json
    return json.loads(text)


def _expr_vars(e: Expression) -> Iterator[Var]:
    if isinstance(e, VarRef):
        yield e.var
    elif isinstance(e, BinOp):
        yield from _expr_vars(e.left)
        yield from _expr_vars(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _expr_vars(a)


def parse_query(text: str) -> Query:
    p = _Parser(text)
    q = p.query()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after query")
    return q


def parse_query_prefix(text: str, start: int = 0) -> tuple[Query, int]:
    """Parse one query starting at ``start``; return it and the end offset."""
    p = _Parser(text, start, lenient=True)
    q = p.query()
    return q, p.tok.pos


# --------------------------------------------------------------------------
# evaluation

def _num(term: Term, op: str) -> float:
    if isinstance(term, Literal) and term.is_number:
        return term.value
    raise EvalError(f"type mismatch: {op} needs numbers, got {term_text(term)}")


def _string(term: Term) -> str:
    if isinstance(term, Literal):
        return format_number(term.value) if term.is_number else term.value
    if isinstance(term, IRI):
        return term.value
    raise EvalError(f"cannot convert {term} to a string")


def eval_expression(expr: Expression, binding: dict) -> Term:
    if isinstance(expr, Const):
        return expr.term
    if isinstance(expr, VarRef):
        try:
            return binding[expr.var]
        except KeyError:
            raise EvalError(f"unbound variable {expr.var}") from None
    if isinstance(expr, BinOp):
        a = _num(eval_expression(expr.left, binding), expr.op)
        b = _num(eval_expression(expr.right, binding), expr.op)
        if expr.op == "+":
            r = a + b
        elif expr.op == "-":
            r = a - b
        elif expr.op == "*":
            r = a * b
        else:
            if b == 0:
                raise EvalError("division by zero")
            r = a / b
        if not math.isfinite(r):
            raise EvalError(f"non-finite result of {expr.op}")
        return Literal(r)
    if isinstance(expr, Call):
        args = [eval_expression(a, binding) for a in expr.args]
        if expr.fn == "str":
            return Literal(_string(args[0]))
        if expr.fn == "concat":
            parts = []
            for a in args:
                if not (isinstance(a, Literal) and not a.is_number):
                    raise EvalError(f"type mismatch: concat needs strings, got {term_text(a)}")
                parts.append(a.value)
            return Literal("".join(parts))
        nums = [_num(a, expr.fn) for a in args]
        if expr.fn == "min":
            return Literal(min(nums))
        if expr.fn == "max":
            return Literal(max(nums))
        return Literal(abs(nums[0]))
    raise EvalError(f"unknown expression node {expr!r}")


def _instantiate(term, binding, fresh):
    if isinstance(term, Var):
        return binding[term]
    if isinstance(term, Blank):
        return fresh[term.label]
    return term


def construct_instances(store, query: Query, graphs=None, blank_prefix="v",
                        warnings: Optional[list] = None):
    """Yield ``(binding, triples)`` for each solution of the where clause.

    Template blank labels get fresh blank nodes per solution; a template
    whose evaluation fails is dropped for that solution and a warning is
    recorded.
    """
    if graphs is None and query.from_graph is not None:
        graphs = query.from_graph
    labels = query.template_blanks()
    counter = 0
    for binding in match_bgp(store, query.pattern, graphs):
        fresh = {}
        for label in labels:
            fresh[label] = Blank(f"{blank_prefix}{counter}")
            counter += 1
        out = []
        for tmpl in query.templates:
            try:
                s = _instantiate(tmpl.s, binding, fresh)
                p = _instantiate(tmpl.p, binding, fresh)
                if isinstance(tmpl.o, Const) and isinstance(tmpl.o.term, Blank):
                    o = fresh[tmpl.o.term.label]
                else:
                    o = eval_expression(tmpl.o, binding)
                if isinstance(s, Literal) or not isinstance(p, IRI):
                    raise EvalError(f"ill-formed triple ({term_text(s)}, {term_text(p)}, ...)")
            except EvalError as exc:
                msg = f"template {tmpl} skipped: {exc}"
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
                continue
            out.append((s, p, o))
        yield binding, out


def eval_construct(store, query: Query, graphs=None, blank_prefix="v",
                   warnings: Optional[list] = None) -> Graph:
    result = Graph()
    for _, triples in construct_instances(store, query, graphs, blank_prefix, warnings):
        result.update(triples)
    return result
