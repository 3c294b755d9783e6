"""Metric graphs with Neumann-Kirchhoff vertices.

A graph is a collection of finite edges (intervals), loops (both endpoints
coincide) and half-lines, glued at vertices.  A subset of vertices may be
declared as the boundary for Dirichlet-to-Neumann computations.  Graphs are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

__all__ = [
    "Edge",
    "MetricGraph",
    "Pendant",
    "Loop",
    "Internal",
    "HalfLine",
    "GraphSpecError",
    "parse_graph",
    "serialize_graph",
    "classify_edge",
    "scale_graph",
    "min_edge_length",
    "absorb_degree2",
    "remainder_graph",
]


class GraphSpecError(ValueError):
    """Raised for malformed graph-spec text or invalid graph structure."""


@dataclass(frozen=True)
class Edge:
    """A single edge: finite interval, loop (v1 == v2) or half-line (v2 is None).

    Finite edges carry a coordinate x in [0, length] oriented from v1 to v2;
    half-lines carry x in [0, inf) from their single vertex.
    """

    id: str
    v1: str
    v2: str | None
    length: float | None

    @property
    def is_halfline(self) -> bool:
        return self.v2 is None

    @property
    def is_loop(self) -> bool:
        return self.v2 is not None and self.v1 == self.v2

    def __post_init__(self):
        if self.is_halfline:
            if self.length is not None:
                raise GraphSpecError(f"half-line {self.id!r} must not carry a length")
        else:
            if self.length is None or not self.length > 0:
                raise GraphSpecError(
                    f"edge {self.id!r} needs a strictly positive length, got {self.length!r}"
                )


# Edge kinds.  N counts edges of the remainder graph attached at a vertex,
# so a pendant attachment vertex has degree N+1 and a loop vertex N+2.


@dataclass(frozen=True)
class Pendant:
    length: float
    n: int


@dataclass(frozen=True)
class Loop:
    length_total: float
    n: int


@dataclass(frozen=True)
class Internal:
    length_total: float
    n_minus: int
    n_plus: int


@dataclass(frozen=True)
class HalfLine:
    pass


EdgeKind = Pendant | Loop | Internal | HalfLine


@dataclass(frozen=True, eq=False)
class MetricGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    boundary: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.validate()

    def __eq__(self, other) -> bool:
        """Structural equality; vertex/edge order is irrelevant."""
        if not isinstance(other, MetricGraph):
            return NotImplemented
        return (
            set(self.vertices) == set(other.vertices)
            and set(self.edges) == set(other.edges)
            and self.boundary == other.boundary
        )

    def __hash__(self) -> int:
        return hash((frozenset(self.vertices), frozenset(self.edges), self.boundary))

    # -- validation -------------------------------------------------------

    def validate(self, require_connected: bool = True) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise GraphSpecError("duplicate vertex ids")
        if not vs:
            raise GraphSpecError("graph has no vertices")
        seen = set()
        for e in self.edges:
            if e.id in seen:
                raise GraphSpecError(f"duplicate edge id {e.id!r}")
            seen.add(e.id)
            if e.v1 not in vs:
                raise GraphSpecError(f"edge {e.id!r} references unknown vertex {e.v1!r}")
            if e.v2 is not None and e.v2 not in vs:
                raise GraphSpecError(f"edge {e.id!r} references unknown vertex {e.v2!r}")
        for b in self.boundary:
            if b not in vs:
                raise GraphSpecError(f"boundary vertex {b!r} does not exist")
        if require_connected and not self._connected():
            raise GraphSpecError("graph is not connected")

    def _connected(self) -> bool:
        if not self.edges:
            return len(self.vertices) == 1
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            if e.v2 is not None:
                adj[e.v1].add(e.v2)
                adj[e.v2].add(e.v1)
        stack, visited = [self.vertices[0]], {self.vertices[0]}
        while stack:
            for w in adj[stack.pop()]:
                if w not in visited:
                    visited.add(w)
                    stack.append(w)
        return len(visited) == len(self.vertices)

    # -- queries ----------------------------------------------------------

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(f"no edge {edge_id!r}")

    def degree(self, v: str) -> int:
        """Vertex degree; a loop counts twice, a half-line once."""
        d = 0
        for e in self.edges:
            if e.is_halfline:
                d += e.v1 == v
            elif e.is_loop:
                d += 2 * (e.v1 == v)
            else:
                d += (e.v1 == v) + (e.v2 == v)
        return d

    def finite_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.is_halfline]

    def halflines(self) -> list[Edge]:
        return [e for e in self.edges if e.is_halfline]

    @property
    def is_compact(self) -> bool:
        return not self.halflines()

    def total_length(self) -> float:
        """Sum of finite edge lengths (half-lines excluded)."""
        return sum(e.length for e in self.finite_edges())


def classify_edge(g: MetricGraph, edge_id: str) -> EdgeKind:
    """Classify an edge as pendant, loop, internal or half-line.

    The incidence counts follow the remainder-graph convention: a pendant of
    attachment degree d gets n = d - 1, a loop at a vertex of degree d gets
    n = d - 2, an internal edge gets n = d - 1 at each endpoint.  A bare
    interval (both endpoints degree 1) reports Pendant with n = 0.
    """
    e = g.edge(edge_id)
    if e.is_halfline:
        return HalfLine()
    if e.is_loop:
        return Loop(length_total=e.length, n=g.degree(e.v1) - 2)
    d1, d2 = g.degree(e.v1), g.degree(e.v2)
    if d1 == 1 and d2 == 1:
        return Pendant(length=e.length, n=0)
    if d1 == 1:
        return Pendant(length=e.length, n=d2 - 1)
    if d2 == 1:
        return Pendant(length=e.length, n=d1 - 1)
    return Internal(length_total=e.length, n_minus=d1 - 1, n_plus=d2 - 1)


def scale_graph(g: MetricGraph, mu: float) -> MetricGraph:
    """Multiply every finite edge length by mu; half-lines are unaffected.

    Connectivity is not re-checked, so (possibly disconnected) remainder
    graphs scale fine.
    """
    if not mu > 0:
        raise ValueError(f"scale factor must be positive, got {mu}")
    edges = tuple(
        e if e.is_halfline else replace(e, length=e.length * mu) for e in g.edges
    )
    return _raw_graph(g.vertices, edges, g.boundary)


def min_edge_length(g: MetricGraph) -> float:
    fin = g.finite_edges()
    if not fin:
        raise ValueError("graph has no finite edges")
    return min(e.length for e in fin)


def absorb_degree2(g: MetricGraph) -> MetricGraph:
    """Merge the two edges meeting at each interior degree-2 NK vertex.

    Such vertices do not affect solutions and absorbing them lengthens the
    effective edge.  Boundary vertices and vertices of an isolated circle
    (a loop whose vertex has no other edges) are kept.
    """
    g = MetricGraph(g.vertices, g.edges, g.boundary)
    while True:
        target = None
        for v in g.vertices:
            if v in g.boundary or g.degree(v) != 2:
                continue
            incident = [
                e
                for e in g.edges
                if e.v1 == v or (e.v2 is not None and e.v2 == v)
            ]
            if len(incident) != 2:  # a loop at v: nothing to merge
                continue
            target = (v, incident)
            break
        if target is None:
            return g
        v, (ea, eb) = target
        other_a = ea.v2 if ea.v1 == v else ea.v1
        other_b = eb.v2 if eb.v1 == v else eb.v1
        merged_id = min(ea.id, eb.id)
        if ea.is_halfline or eb.is_halfline:
            if ea.is_halfline and eb.is_halfline:
                raise GraphSpecError(
                    f"cannot absorb vertex {v!r} joining two half-lines"
                )
            # finite stub + half-line -> half-line at the far vertex
            far = other_a if eb.is_halfline else other_b
            new = Edge(merged_id, far, None, None)
        else:
            new = Edge(merged_id, other_a, other_b, ea.length + eb.length)
        edges = tuple(e for e in g.edges if e.id not in (ea.id, eb.id)) + (new,)
        vertices = tuple(u for u in g.vertices if u != v)
        g = MetricGraph(vertices, edges, g.boundary)


def _raw_graph(vertices, edges, boundary) -> MetricGraph:
    """Construct without the connectivity requirement (remainder graphs)."""
    gc = object.__new__(MetricGraph)
    object.__setattr__(gc, "vertices", tuple(vertices))
    object.__setattr__(gc, "edges", tuple(edges))
    object.__setattr__(gc, "boundary", frozenset(boundary))
    gc.validate(require_connected=False)
    return gc


def remainder_graph(g: MetricGraph, edge_id: str) -> MetricGraph:
    """Graph with one finite edge removed and its endpoints declared boundary.

    Endpoints of the removed edge are kept (they carry the matching data) even
    when isolated; other vertices left without edges are dropped.  The result
    may be disconnected, so connectivity validation is relaxed.
    """
    e = g.edge(edge_id)
    if e.is_halfline:
        raise ValueError("cannot take the remainder of a half-line")
    attach = {e.v1} if e.is_loop else {e.v1, e.v2}
    # a pendant's degree-1 tip belongs to the removed edge, not the remainder
    attach = {v for v in attach if e.is_loop or g.degree(v) > 1}
    edges = tuple(x for x in g.edges if x.id != edge_id)
    used = set(attach)
    for x in edges:
        used.add(x.v1)
        if x.v2 is not None:
            used.add(x.v2)
    vertices = tuple(v for v in g.vertices if v in used)
    return _raw_graph(vertices, edges, attach)


# -- graph-spec text format -----------------------------------------------
#
#   vertex <id>
#   edge <id> <v1> <v2> <length>
#   loop <id> <v> <length>
#   halfline <id> <v>
#   boundary <id>...
#   # comment


def parse_graph(text: str) -> MetricGraph:
    vertices: list[str] = []
    edges: list[Edge] = []
    boundary: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            kw = tok[0]
            if kw == "vertex" and len(tok) == 2:
                vertices.append(tok[1])
            elif kw == "edge" and len(tok) == 5:
                edges.append(Edge(tok[1], tok[2], tok[3], _parse_length(tok[4])))
            elif kw == "loop" and len(tok) == 4:
                edges.append(Edge(tok[1], tok[2], tok[2], _parse_length(tok[3])))
            elif kw == "halfline" and len(tok) == 3:
                edges.append(Edge(tok[1], tok[2], None, None))
            elif kw == "boundary" and len(tok) >= 2:
                boundary.update(tok[1:])
            else:
                raise GraphSpecError(f"unrecognized directive {line!r}")
        except GraphSpecError as err:
            raise GraphSpecError(f"line {lineno}: {err}") from None
    try:
        return MetricGraph(tuple(vertices), tuple(edges), frozenset(boundary))
    except GraphSpecError as err:
        raise GraphSpecError(f"invalid graph: {err}") from None


def _parse_length(tok: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise GraphSpecError(f"bad length {tok!r}") from None
    if not val > 0:
        raise GraphSpecError(f"length must be positive, got {tok!r}")
    return val


def serialize_graph(g: MetricGraph) -> str:
    """Canonical graph-spec text (sorted ids); parse_graph round-trips it."""
    lines = [f"vertex {v}" for v in sorted(g.vertices)]
    for e in sorted(g.edges, key=lambda e: e.id):
        if e.is_halfline:
            lines.append(f"halfline {e.id} {e.v1}")
        elif e.is_loop:
            lines.append(f"loop {e.id} {e.v1} {e.length!r}")
        else:
            lines.append(f"edge {e.id} {e.v1} {e.v2} {e.length!r}")
    if g.boundary:
        lines.append("boundary " + " ".join(sorted(g.boundary)))
    return "\n".join(lines) + "\n"
