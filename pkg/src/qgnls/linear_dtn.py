"""Exact linear Dirichlet-to-Neumann maps of -Delta + 1 on mu-scaled graphs.

Two independent routes are provided:

* ``dtn_matrix`` assembles the exact solution of (-Delta + 1) u = 0 in the
  well-conditioned per-edge basis {exp(-x), exp(-(l - x))} (a single decay
  coefficient on half-lines) and reads off the Neumann data.

* ``dtn_via_scattering`` builds the vertex scattering matrices of the
  Neumann-Kirchhoff graph, forms

      Sigma(mu) = R + T_o exp(-mu L) (I - U exp(-mu L))^{-1} T_i,

  restricts to the boundary block and converts through
  M_Gamma(mu) = mu (I - Sigma)(I + Sigma)^{-1}.

Conventions.  Everything public works at unit spectral level on the scaled
graph Gamma_mu, where the DtN matrix tends to diag(d_j), the boundary-vertex
degrees.  The scattering route internally works with -Delta + mu^2 on the
unscaled graph and is rescaled by 1/mu at the end.  Neumann data are sums of
derivatives pointing out of the subgraph at a boundary vertex, so that a
single edge of scaled length L gives the positive value tanh(L).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric_graph import Edge, MetricGraph, _raw_graph, scale_graph

__all__ = [
    "EdgeBasisSolution",
    "DtnMatrix",
    "solve_linear_bvp",
    "neumann_data",
    "linear_solution_norm",
    "dtn_matrix",
    "dtn_via_scattering",
    "dtn_unit_to_spectral",
    "dtn_spectral_to_unit",
]


@dataclass(frozen=True)
class EdgeBasisSolution:
    """Exact solution on a scaled graph in the decaying exponential basis.

    Finite edge e of length l:  u(x) = a_e exp(-x) + b_e exp(-(l - x));
    half-line:                  u(x) = a_e exp(-x), b_e = 0.
    """

    graph: MetricGraph
    coeff: dict[str, tuple[float, float]]
    boundary_values: dict[str, float]

    def edge_values(self, edge_id: str, x: np.ndarray) -> np.ndarray:
        e = self.graph.edge(edge_id)
        a, b = self.coeff[edge_id]
        x = np.asarray(x, dtype=float)
        if e.is_halfline:
            return a * np.exp(-x)
        return a * np.exp(-x) + b * np.exp(-(e.length - x))

    def edge_slopes(self, edge_id: str, x: np.ndarray) -> np.ndarray:
        e = self.graph.edge(edge_id)
        a, b = self.coeff[edge_id]
        x = np.asarray(x, dtype=float)
        if e.is_halfline:
            return -a * np.exp(-x)
        return -a * np.exp(-x) + b * np.exp(-(e.length - x))


@dataclass(frozen=True)
class DtnMatrix:
    mu: float
    boundary: tuple[str, ...]
    matrix: np.ndarray


def _endpoint_slots(g: MetricGraph):
    """(edge, end) incidences per vertex; a loop contributes both ends."""
    slots: dict[str, list[tuple[str, int]]] = {v: [] for v in g.vertices}
    for e in g.edges:
        slots[e.v1].append((e.id, 0))
        if e.v2 is not None:
            slots[e.v2].append((e.id, 1))
    return slots


def solve_linear_bvp(g_scaled: MetricGraph, p: dict[str, float]) -> EdgeBasisSolution:
    """Solve (-Delta + 1) u = 0 on the scaled graph with u = p on the boundary.

    NK conditions hold at all non-boundary vertices and the solution decays
    on half-lines.  The coefficient system has size 2E + H and is solved
    densely (it is tiny).
    """
    B = set(g_scaled.boundary)
    if set(p) != B:
        raise ValueError("boundary values must be given exactly on the boundary set")
    edges = list(g_scaled.edges)
    index: dict[tuple[str, int], int] = {}
    n = 0
    for e in edges:
        index[(e.id, 0)] = n
        n += 1
        if not e.is_halfline:
            index[(e.id, 1)] = n
            n += 1

    def value_row(eid, end):
        # endpoint value of u on edge eid at end 0 (x=0) or 1 (x=l)
        row = np.zeros(n)
        e = g_scaled.edge(eid)
        if e.is_halfline:
            row[index[(eid, 0)]] = 1.0  # value at x=0
            return row
        d = np.exp(-e.length)
        if end == 0:
            row[index[(eid, 0)]] = 1.0
            row[index[(eid, 1)]] = d
        else:
            row[index[(eid, 0)]] = d
            row[index[(eid, 1)]] = 1.0
        return row

    def outflux_row(eid, end):
        # derivative pointing out of the graph at the vertex (= -u' into edge)
        row = np.zeros(n)
        e = g_scaled.edge(eid)
        if e.is_halfline:
            row[index[(eid, 0)]] = 1.0  # -u'(0) = a
            return row
        d = np.exp(-e.length)
        if end == 0:
            row[index[(eid, 0)]] = 1.0
            row[index[(eid, 1)]] = -d
        else:
            row[index[(eid, 0)]] = -d
            row[index[(eid, 1)]] = 1.0
        return row

    slots = _endpoint_slots(g_scaled)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    r = 0
    for v in g_scaled.vertices:
        inc = slots[v]
        if not inc:
            continue
        if v in B:
            for eid, end in inc:
                A[r] = value_row(eid, end)
                rhs[r] = p[v]
                r += 1
        else:
            first = inc[0]
            for eid, end in inc[1:]:
                A[r] = value_row(eid, end) - value_row(*first)
                r += 1
            for eid, end in inc:
                A[r] += outflux_row(eid, end)
            r += 1
    assert r == n, "coefficient system must be square"
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as err:  # positive operator: cannot happen
        raise RuntimeError(f"edge-coefficient system is singular: {err}") from None
    coeff = {}
    for e in edges:
        a = sol[index[(e.id, 0)]]
        b = 0.0 if e.is_halfline else sol[index[(e.id, 1)]]
        coeff[e.id] = (a, b)
    return EdgeBasisSolution(g_scaled, coeff, dict(p))


def neumann_data(sol: EdgeBasisSolution) -> dict[str, float]:
    """q_j = sum over incident edges of the out-of-graph derivative at v_j."""
    g = sol.graph
    slots = _endpoint_slots(g)
    out: dict[str, float] = {}
    for v in g.boundary:
        q = 0.0
        for eid, end in slots[v]:
            e = g.edge(eid)
            a, b = sol.coeff[eid]
            if e.is_halfline:
                q += a
            elif end == 0:
                q += a - b * np.exp(-e.length)
            else:
                q += b - a * np.exp(-e.length)
        out[v] = q
    return out


def linear_solution_norm(sol: EdgeBasisSolution) -> float:
    """Exact squared L2 norm from the hyperbolic antiderivatives."""
    total = 0.0
    for e in sol.graph.edges:
        a, b = sol.coeff[e.id]
        if e.is_halfline:
            total += 0.5 * a * a
        else:
            l = e.length
            total += 0.5 * (a * a + b * b) * (1.0 - np.exp(-2.0 * l)) + 2.0 * a * b * l * np.exp(-l)
    return total


def _boundary_tuple(g: MetricGraph, boundary) -> tuple[str, ...]:
    b = tuple(sorted(boundary if boundary is not None else g.boundary))
    if not b:
        raise ValueError("no boundary vertices given")
    return b


def dtn_matrix(g: MetricGraph, mu: float, boundary=None) -> DtnMatrix:
    """Column-by-column DtN matrix of -Delta + 1 on the mu-scaled graph."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    b = _boundary_tuple(g, boundary)
    gs = scale_graph(_raw_graph(g.vertices, g.edges, b), mu)
    cols = []
    for j, vj in enumerate(b):
        p = {v: float(v == vj) for v in b}
        q = neumann_data(solve_linear_bvp(gs, p))
        cols.append([q[v] for v in b])
    M = np.array(cols).T
    return DtnMatrix(mu=mu, boundary=b, matrix=M)


def dtn_unit_to_spectral(M: np.ndarray, mu: float) -> np.ndarray:
    """Unit-level map on Gamma_mu -> map of -Delta + mu^2 on Gamma."""
    return mu * M


def dtn_spectral_to_unit(M_gamma: np.ndarray, mu: float) -> np.ndarray:
    return M_gamma / mu


# -- scattering route ---------------------------------------------------------


def _with_dummy_vertices(g: MetricGraph, stub_length: float = 1.0):
    """Split each half-line at a degree-2 dummy vertex into stub + lead.

    Returns the compact graph (all finite edges incl. stubs) and the list of
    lead attachment vertices.  Lead order: boundary vertices first (sorted),
    then dummies in edge order.
    """
    vertices = list(g.vertices)
    edges = []
    dummies = []
    for e in g.edges:
        if e.is_halfline:
            w = f"_dummy_{e.id}"
            vertices.append(w)
            edges.append(Edge(e.id, e.v1, w, stub_length))
            dummies.append(w)
        else:
            edges.append(e)
    return _raw_graph(vertices, edges, g.boundary), dummies


def dtn_via_scattering(g: MetricGraph, mu: float, boundary=None) -> DtnMatrix:
    """DtN matrix through the NK scattering formula (independent route).

    Half-lines become leads behind dummy degree-2 vertices; each boundary
    vertex gets one lead.  The boundary block of the compact scattering
    matrix yields M_Gamma = mu (I - Sigma)/(I + Sigma), then units rescale.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    b = _boundary_tuple(g, boundary)
    gc, dummies = _with_dummy_vertices(_raw_graph(g.vertices, g.edges, b))
    leads = list(b) + dummies  # one lead per entry
    lead_at = {v: i for i, v in enumerate(leads)}
    if len(lead_at) != len(leads):
        raise ValueError("boundary vertices must be distinct")

    # directed bonds on the compact graph
    bonds = []  # (edge id, origin vertex, terminal vertex, length)
    for e in gc.finite_edges():
        bonds.append((e.id, e.v1, e.v2, e.length))
        bonds.append((e.id, e.v2, e.v1, e.length))
    nb = len(bonds)
    rev = [i ^ 1 for i in range(nb)]  # paired consecutive entries

    deg = {v: 0 for v in gc.vertices}
    for _, o, t, _l in bonds:
        deg[o] += 1
    for v in leads:
        deg[v] += 1

    U = np.zeros((nb, nb))
    Ti = np.zeros((nb, len(leads)))
    To = np.zeros((len(leads), nb))
    R = np.zeros((len(leads), len(leads)))
    for i, (_eid, o, _t, _l) in enumerate(bonds):
        # bond i leaves vertex o; scatter incoming bonds and the lead at o
        for j, (_e2, _o2, t2, _l2) in enumerate(bonds):
            if t2 == o:
                U[i, j] = 2.0 / deg[o] - (1.0 if rev[i] == j else 0.0)
        if o in lead_at:
            Ti[i, lead_at[o]] = 2.0 / deg[o]
    for v, c in lead_at.items():
        R[c, c] = 2.0 / deg[v] - 1.0
        for j, (_e2, _o2, t2, _l2) in enumerate(bonds):
            if t2 == v:
                To[c, j] = 2.0 / deg[v]

    decay = np.diag([np.exp(-mu * l) for (_e, _o, _t, l) in bonds])
    core = np.eye(nb) - U @ decay
    # cond grows like 1/mu as -mu^2 approaches the spectrum at 0, and the
    # final (I - Sigma)/mu conversion amplifies the rounding once more
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > 1e6:
        raise RuntimeError(
            f"scattering core matrix ill-conditioned (cond={cond:.2e}); mu too small"
        )
    sigma_full = R + To @ decay @ np.linalg.solve(core, Ti)
    nbound = len(b)
    sigma = sigma_full[:nbound, :nbound]  # purely radiating dummies drop out
    eye = np.eye(nbound)
    M_gamma = mu * np.linalg.solve(eye + sigma, eye - sigma)
    return DtnMatrix(mu=mu, boundary=b, matrix=dtn_spectral_to_unit(M_gamma, mu))
