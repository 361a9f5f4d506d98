"""Named-graph triple store and basic graph pattern matching."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

from .errors import CvfError
from .rdf import Blank, Graph, Term, Triple


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self):
        return "?" + self.name


PatternTerm = Union[Term, Var]
Binding = dict  # Var -> Term


class Store:
    """Named graphs; one writer during loading, read-only once frozen."""

    def __init__(self):
        self.graphs: dict[str, Graph] = {}
        self.frozen = False

    def add_graph(self, name: str, graph: Graph) -> Graph:
        if self.frozen:
            raise CvfError("store is frozen")
        if name not in self.graphs:
            # adopt rather than copy; loaded graphs are not mutated afterwards
            self.graphs[name] = graph
            return graph
        target = self.graphs[name]
        target.update(graph)
        return target

    def add(self, name: str, triple):
        if self.frozen:
            raise CvfError("store is frozen")
        self.graphs.setdefault(name, Graph()).add(triple)

    def freeze(self) -> "Store":
        self.frozen = True
        return self

    def __contains__(self, name):
        return name in self.graphs

    def view(self, names: Optional[Union[str, Sequence[str]]] = None) -> "GraphView":
        if names is None:
            names = list(self.graphs)
        elif isinstance(names, str):
            names = [names]
        missing = [n for n in names if n not in self.graphs]
        if missing:
            raise CvfError(f"unknown graph {missing[0]!r}")
        return GraphView([self.graphs[n] for n in names])


class GraphView:
    """Read-only set union of several graphs."""

    def __init__(self, graphs: Sequence[Graph]):
        self.graphs = list(graphs)

    def triples(self, s=None, p=None, o=None) -> Iterator[Triple]:
        if len(self.graphs) == 1:
            yield from self.graphs[0].triples(s, p, o)
            return
        seen = set()
        for g in self.graphs:
            for t in g.triples(s, p, o):
                if t not in seen:
                    seen.add(t)
                    yield t

    def __iter__(self):
        return self.triples()

    def objects(self, s, p):
        return [t.o for t in self.triples(s, p, None)]

    def value(self, s, p):
        return next((t.o for t in self.triples(s, p, None)), None)

    def has_subject(self, s):
        return any(g.has_subject(s) for g in self.graphs)


def _normalize_pattern(pattern) -> list[tuple]:
    # blank labels in patterns act as variables that are never returned
    out = []
    for triple in pattern:
        out.append(tuple(Var("_:" + t.label) if isinstance(t, Blank) else t for t in triple))
    return out


def _source(store, graphs):
    if isinstance(store, (Graph, GraphView)):
        return store
    return store.view(graphs)


def match_bgp(store, pattern, graphs=None) -> Iterator[Binding]:
    """Yield every total binding of ``pattern`` against the store.

    Triple patterns are joined left to right, substituting variables bound
    by earlier patterns. ``graphs`` selects one graph name, several (their
    union), or all graphs when omitted. A bare Graph is also accepted.
    """
    source = _source(store, graphs)
    pats = _normalize_pattern(pattern)

    def solve(i: int, binding: dict) -> Iterator[dict]:
        if i == len(pats):
            yield binding
            return
        query = [binding.get(t, None) if isinstance(t, Var) else t for t in pats[i]]
        for triple in source.triples(*query):
            new = binding
            ok = True
            for pat_term, value in zip(pats[i], triple):
                if isinstance(pat_term, Var):
                    bound = new.get(pat_term)
                    if bound is None:
                        if new is binding:
                            new = dict(binding)
                        new[pat_term] = value
                    elif bound != value:
                        ok = False
                        break
            if ok:
                yield from solve(i + 1, new)

    for b in solve(0, {}):
        yield {k: v for k, v in b.items() if not k.name.startswith("_:")}
