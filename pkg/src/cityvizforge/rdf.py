"""RDF terms, graphs, line-oriented serialization and isomorphism."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Union

from .errors import CvfError

VOCAB = "http://cityvizforge.org/ns#"
CGML = "http://www.opengis.net/citygml/2.0#"
GML = "http://www.opengis.net/gml#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"

PREFIXES = {"": VOCAB, "cgml": CGML, "gml": GML, "rdf": RDF}


# Terms cache their hash: graphs hash the same terms millions of times and the
# generated dataclass __hash__ is slow.

@dataclass(frozen=True, slots=True)
class IRI:
    value: str
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.value:
            raise ValueError("empty IRI")
        object.__setattr__(self, "_h", hash(("i", self.value)))

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        return self is other or (other.__class__ is IRI and other.value == self.value)

    def __str__(self):
        return pname(self)


@dataclass(frozen=True, slots=True)
class Blank:
    label: str
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.label:
            raise ValueError("empty blank node label")
        object.__setattr__(self, "_h", hash(("b", self.label)))

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        return self is other or (other.__class__ is Blank and other.label == self.label)

    def __str__(self):
        return "_:" + self.label


@dataclass(frozen=True, slots=True)
class Literal:
    value: Union[float, str]
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool):
            raise TypeError("boolean literals are not supported")
        if isinstance(v, (int, float)):
            if not math.isfinite(v):
                raise ValueError(f"non-finite numeric literal {v!r}")
            object.__setattr__(self, "value", float(v))
        elif not isinstance(v, str):
            raise TypeError(f"unsupported literal value {v!r}")
        object.__setattr__(self, "_h", hash(("l", self.value)))

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        return self is other or (other.__class__ is Literal and other.value == self.value)

    @property
    def is_number(self) -> bool:
        return isinstance(self.value, float)

    def __str__(self):
        return _literal_text(self)


Term = Union[IRI, Blank, Literal]


class Triple(NamedTuple):
    s: Term
    p: IRI
    o: Term


def iri(name: str) -> IRI:
    """Expand a prefixed name (``cgml:Building``, ``:value``) or wrap a full IRI."""
    if name.startswith("<") and name.endswith(">"):
        return IRI(name[1:-1])
    prefix, sep, local = name.partition(":")
    if sep and prefix in PREFIXES and "//" not in name:
        return IRI(PREFIXES[prefix] + local)
    return IRI(name)


V = lambda local: IRI(VOCAB + local)  # noqa: E731
TYPE = IRI(RDF + "type")


def pname(term: IRI) -> str:
    for prefix, ns in PREFIXES.items():
        if term.value.startswith(ns) and re.fullmatch(r"[\w.-]+", term.value[len(ns):]):
            return f"{prefix}:{term.value[len(ns):]}"
    return f"<{term.value}>"


def term_text(term: Term) -> str:
    """Compact display form, also used for provenance ids."""
    if isinstance(term, IRI):
        return pname(term)
    return str(term)


def term_from_text(text: str) -> Term:
    text = text.strip()
    if text.startswith("_:"):
        return Blank(text[2:])
    if text.startswith('"'):
        return Literal(json.loads(text))
    if text.startswith("<") or ":" in text:
        return iri(text)
    return Literal(float(text))


def _number_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _literal_text(lit: Literal) -> str:
    if lit.is_number:
        return _number_text(lit.value)
    return json.dumps(lit.value, ensure_ascii=False)


def sort_key(term: Term):
    if isinstance(term, IRI):
        return (0, term.value)
    if isinstance(term, Blank):
        m = re.fullmatch(r"(.*?)(\d+)", term.label)
        return (1, m.group(1), int(m.group(2)), "") if m else (1, term.label, -1, "")
    if term.is_number:
        return (2, 0, term.value, "")
    return (2, 1, 0.0, term.value)


class Graph:
    """A set of triples with insertion-ordered subject/predicate/object indexes.

    Iteration order is insertion order, so results are deterministic
    regardless of string-hash randomisation.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: dict[Triple, None] = {}
        self._by_s: dict[Term, dict[Triple, None]] = {}
        self._by_p: dict[Term, dict[Triple, None]] = {}
        self._by_o: dict[Term, dict[Triple, None]] = {}
        for t in triples:
            self.add(t)

    def add(self, triple) -> bool:
        t = Triple(*triple)
        if not isinstance(t.s, (IRI, Blank)):
            raise ValueError(f"literal subject in {t}")
        if not isinstance(t.p, IRI):
            raise ValueError(f"predicate must be an IRI in {t}")
        if not isinstance(t.o, (IRI, Blank, Literal)):
            raise TypeError(f"bad object in {t}")
        return self._insert(t)

    def _insert(self, t: Triple) -> bool:
        # caller guarantees well-typed terms
        if t in self._triples:
            return False
        self._triples[t] = None
        self._by_s.setdefault(t.s, {})[t] = None
        self._by_p.setdefault(t.p, {})[t] = None
        self._by_o.setdefault(t.o, {})[t] = None
        return True

    def update(self, triples: Iterable[Triple]):
        for t in triples:
            self.add(t)

    def __contains__(self, triple) -> bool:
        return Triple(*triple) in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def __repr__(self):
        return f"<Graph {len(self)} triples>"

    def triples(self, s=None, p=None, o=None) -> Iterator[Triple]:
        """Triples matching the given positions; ``None`` is a wildcard."""
        buckets = []
        for term, index in ((s, self._by_s), (p, self._by_p), (o, self._by_o)):
            if term is not None:
                bucket = index.get(term)
                if not bucket:
                    return iter(())
                buckets.append(bucket)
        if not buckets:
            return iter(self._triples)
        best = min(buckets, key=len)
        return (t for t in best
                if (s is None or t.s == s) and (p is None or t.p == p) and (o is None or t.o == o))

    def objects(self, s, p) -> list[Term]:
        return [t.o for t in self.triples(s, p, None)]

    def value(self, s, p) -> Optional[Term]:
        objs = self.objects(s, p)
        return objs[0] if objs else None

    def subjects(self, p=None, o=None) -> list[Term]:
        return list(dict.fromkeys(t.s for t in self.triples(None, p, o)))

    def types(self, s) -> list[Term]:
        return self.objects(s, TYPE)

    def has_subject(self, s) -> bool:
        return s in self._by_s

    def has_term(self, term) -> bool:
        return term in self._by_s or term in self._by_o


def serialize_graph(graph: Graph) -> str:
    """One ``S P O .`` line per triple, sorted; blank labels are kept as-is."""
    lines = sorted(graph, key=lambda t: (sort_key(t.s), sort_key(t.p), sort_key(t.o)))
    return "".join(f"{_nt(t.s)} {_nt(t.p)} {_nt(t.o)} .\n" for t in lines)


def _nt(term: Term) -> str:
    if isinstance(term, IRI):
        return f"<{term.value}>"
    return str(term)


_LINE = re.compile(
    r'^(<[^>]*>|_:\S+)\s+(<[^>]*>)\s+(<[^>]*>|_:\S+|"(?:[^"\\]|\\.)*"|[-+0-9.eE]+)\s*\.\s*$')


def _parse_nt_term(text: str) -> Term:
    if text.startswith("<"):
        return IRI(text[1:-1])
    if text.startswith("_:"):
        return Blank(text[2:])
    if text.startswith('"'):
        return Literal(json.loads(text))
    return Literal(float(text))


def parse_graph(text: str) -> Graph:
    g = Graph()
    terms: dict[str, Term] = {}  # repeated terms parse once
    # split on \n only: literals may legitimately hold U+2028, \x1c and friends
    for lineno, line in enumerate(text.split("\n"), 1):
        line = line.removesuffix("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise CvfError(f"malformed triple line {lineno}: {line!r}")
        parts = []
        for x in m.groups():
            term = terms.get(x)
            if term is None:
                try:
                    term = terms[x] = _parse_nt_term(x)
                except ValueError as exc:
                    raise CvfError(f"bad term on line {lineno}: {exc}") from exc
            parts.append(term)
        g._insert(Triple(*parts))
    return g


def _blank_adjacency(g1: Graph, g2: Graph) -> dict:
    adj: dict = {}
    for side, g in ((1, g1), (2, g2)):
        for t in g:
            if isinstance(t.s, Blank):
                adj.setdefault((side, t.s), []).append((0, t.p, t.o))
            if isinstance(t.o, Blank):
                adj.setdefault((side, t.o), []).append((1, t.p, t.s))
    return adj


def _refine(adj: dict, color: dict) -> dict:
    """Colour refinement over the blank nodes of both graphs with a shared palette.

    Keys are (side, blank); equal colours are necessary for a blank to map
    onto another.
    """
    n_classes = len(set(color.values()))
    while True:
        def tc(side, term):
            return ("b", color[(side, term)]) if isinstance(term, Blank) else ("g", sort_key(term))
        sigs = {k: (color[k], tuple(sorted((d, sort_key(p), tc(k[0], o)) for d, p, o in edges)))
                for k, edges in adj.items()}
        palette = {sig: i for i, sig in enumerate(sorted(set(sigs.values())))}
        color = {k: palette[sig] for k, sig in sigs.items()}
        if len(palette) == n_classes:
            return color
        n_classes = len(palette)


def _classes(color: dict) -> dict:
    classes: dict = {}
    for (side, b), c in color.items():
        classes.setdefault(c, ([], []))[side - 1].append(b)
    return classes


def isomorphic(g1: Graph, g2: Graph) -> bool:
    """Graph isomorphism modulo a bijection of blank nodes."""
    if len(g1) != len(g2):
        return False
    ground1 = {t for t in g1 if not _has_blank(t)}
    ground2 = {t for t in g2 if not _has_blank(t)}
    if ground1 != ground2:
        return False
    adj = _blank_adjacency(g1, g2)
    color = _refine(adj, {k: 0 for k in adj})
    classes = _classes(color)
    if any(len(a) != len(b) for a, b in classes.values()):
        return False
    # Pair the members of each remaining class in label order and refine until
    # the partition is discrete. Interchangeable blanks (same value, same
    # neighbours) make this succeed at once; a failed verification only means
    # the guess was wrong, so fall through to the exhaustive matcher.
    guess = color
    while True:
        classes = _classes(guess)
        if any(len(a) != len(b) for a, b in classes.values()):
            break
        open_ = [c for c, (a, _) in classes.items() if len(a) > 1]
        if not open_:
            m = {a[0]: b[0] for a, b in classes.values()}
            sub = lambda x: m.get(x, x) if isinstance(x, Blank) else x
            if all(Triple(sub(t.s), t.p, sub(t.o)) in g2 for t in g1):
                return True
            break
        guess = dict(guess)
        fresh = max(guess.values()) + 1
        for c in open_:
            a, b = classes[c]
            for x, y in zip(sorted(a, key=sort_key), sorted(b, key=sort_key)):
                guess[(1, x)] = guess[(2, y)] = fresh
                fresh += 1
        guess = _refine(adj, guess)

    import networkx as nx
    from networkx.algorithms.isomorphism import MultiDiGraphMatcher

    def to_nx(g, side):
        h = nx.MultiDiGraph()
        for t in g:
            if not _has_blank(t):
                continue
            for term in (t.s, t.o):
                label = ("b", color[(side, term)]) if isinstance(term, Blank) else ("g", term)
                h.add_node(term, label=label)
            h.add_edge(t.s, t.o, label=t.p)
        return h

    h1, h2 = to_nx(g1, 1), to_nx(g2, 2)
    matcher = MultiDiGraphMatcher(
        h1, h2,
        node_match=lambda a, b: a["label"] == b["label"],
        edge_match=lambda a, b: sorted(sort_key(e["label"]) for e in a.values())
        == sorted(sort_key(e["label"]) for e in b.values()),
    )
    return matcher.is_isomorphic()


def _has_blank(t: Triple) -> bool:
    return isinstance(t.s, Blank) or isinstance(t.o, Blank)
