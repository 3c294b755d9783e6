"""Large-mass predictions and ranking of edge-localized states.

For an edge of half-length l (full length for a pendant) carrying a bump of
the dnoidal family at mu = sqrt(-Lambda), the closed forms are

    pendant   k = 1 + 8 (N-1)/(N+1) e^{-2 mu l},   Q = mu   - 8 (N-1)/(N+1) mu^2 l e^{-2 mu l}
    loop      k = 1 + 8 (N-2)/(N+2) e^{-2 mu l},   Q = 2 mu - 16 (N-2)/(N+2) mu^2 l e^{-2 mu l}
    internal  k = 1 + 8 g(N-,N+) e^{-2 mu l},      Q = 2 mu - 16 g(N-,N+) mu^2 l e^{-2 mu l}

with g(a, b) = sqrt((a-1)/(a+1)) sqrt((b-1)/(b+1)), maximum offset
a* = atanh((N- - N+)/(N- N+ - 1)) / 2 on internal edges, and leading energy
E = -mu^3/3 per bump half (so -mu^3/3 pendant, -2 mu^3/3 otherwise).

``refine_k_matching`` replaces the closed forms by the exact matching of the
single-bump branch against the nonlinear DtN of the remainder graph, and
``rank_edges`` / ``ground_state_existence`` apply the fixed-mass comparison
rules.  E(mu) curves consistent with dE/dLambda = Lambda dQ/dLambda can be
generated from a prediction via ``prediction_branch`` for comparison work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import nonlinear_dtn
from .metric_graph import (
    HalfLine,
    Internal,
    Loop,
    MetricGraph,
    Pendant,
    classify_edge,
    min_edge_length,
    remainder_graph,
    scale_graph,
)

__all__ = [
    "EdgeStatePrediction",
    "RankReport",
    "predict_pendant",
    "predict_loop",
    "predict_internal",
    "predict_edge",
    "refine_k_matching",
    "rank_edges",
    "ground_state_existence",
    "CORRECTION_WARN_FRACTION",
]

CORRECTION_WARN_FRACTION = 0.05  # asymptotics untrustworthy beyond this
LENGTH_TIE_RTOL = 1e-9
_ATANH_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True)
class EdgeStatePrediction:
    """Closed-form large-mass prediction for one edge-localized state."""

    edge_id: str | None
    kind: str                 # "pendant" | "loop" | "internal"
    ell: float                # exponent length: full pendant length or half-length
    n_minus: int
    n_plus: int | None
    mu: float
    k: float
    a: float                  # offset of the maximum (internal edges only)
    Q: float
    E: float
    mass_leading: float       # 1 for pendants, 2 otherwise
    k_coeff: float            # k = 1 + k_coeff e^{-2 mu l}
    q_coeff: float            # Q = m0 mu + q_coeff mu^2 l e^{-2 mu l}
    regime: str
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def mass_at(self, mu: float) -> float:
        return self.mass_leading * mu + self.q_coeff * mu * mu * self.ell * math.exp(
            -2.0 * mu * self.ell
        )

    def k_at(self, mu: float) -> float:
        return 1.0 + self.k_coeff * math.exp(-2.0 * mu * self.ell)

    def energy_leading_at(self, mu: float) -> float:
        return -self.mass_leading * mu**3 / 3.0


def _correction_warning(m0_mu: float, corr: float) -> tuple[str, ...]:
    if abs(corr) > CORRECTION_WARN_FRACTION * abs(m0_mu):
        return (
            "exponential correction exceeds 5% of the leading mass; "
            "asymptotics untrustworthy at this mu",
        )
    return ()


def _build(edge_id, kind, ell, n_minus, n_plus, mu, k_coeff, m0, a, regime, extra=()):
    expo = math.exp(-2.0 * mu * ell)
    q_coeff = -m0 * k_coeff
    corr = q_coeff * mu * mu * ell * expo
    warnings = tuple(extra) + _correction_warning(m0 * mu, corr)
    return EdgeStatePrediction(
        edge_id=edge_id,
        kind=kind,
        ell=ell,
        n_minus=n_minus,
        n_plus=n_plus,
        mu=mu,
        k=1.0 + k_coeff * expo,
        a=a,
        Q=m0 * mu + corr,
        E=-m0 * mu**3 / 3.0,
        mass_leading=m0,
        k_coeff=k_coeff,
        q_coeff=q_coeff,
        regime=regime,
        warnings=warnings,
    )


def predict_pendant(ell: float, n: int, mu: float, edge_id=None) -> EdgeStatePrediction:
    """Pendant of full length ell attached to n remainder edges."""
    if n < 1:
        raise ValueError("pendant needs n >= 1 (use n = 0 only for a bare interval)")
    if not (ell > 0 and mu > 0):
        raise ValueError("ell and mu must be positive")
    k_coeff = 8.0 * (n - 1) / (n + 1)
    regime = "soliton" if n == 1 else "cnoidal"
    return _build(edge_id, "pendant", ell, n, None, mu, k_coeff, 1.0, 0.0, regime)


def predict_loop(ell_half: float, n: int, mu: float, edge_id=None) -> EdgeStatePrediction:
    """Loop of total length 2*ell_half attached to n remainder edges."""
    if n < 1:
        raise ValueError("loop needs n >= 1")
    if not (ell_half > 0 and mu > 0):
        raise ValueError("ell_half and mu must be positive")
    k_coeff = 8.0 * (n - 2) / (n + 2)
    regime = {1: "dnoidal", 2: "undetermined"}.get(n, "cnoidal")
    return _build(edge_id, "loop", ell_half, n, None, mu, k_coeff, 2.0, 0.0, regime)


def internal_tie_factor(n_minus: int, n_plus: int) -> float:
    return math.sqrt((n_minus - 1) / (n_minus + 1)) * math.sqrt(
        (n_plus - 1) / (n_plus + 1)
    )


def predict_internal(
    ell_half: float, n_minus: int, n_plus: int, mu: float, edge_id=None
) -> EdgeStatePrediction:
    """Internal edge of total length 2*ell_half between degrees n-+1 and n++1.

    n- = n+ = 1 makes the offset equation singular and is rejected; a single
    n = 1 endpoint is accepted with a warning (a degree-2 vertex is spurious
    and should be absorbed).
    """
    if n_minus < 1 or n_plus < 1:
        raise ValueError("internal edge needs n-, n+ >= 1")
    if n_minus == 1 and n_plus == 1:
        raise ValueError("n- = n+ = 1 makes the maximum offset singular; absorb the vertices")
    if not (ell_half > 0 and mu > 0):
        raise ValueError("ell_half and mu must be positive")
    warn = ()
    if min(n_minus, n_plus) < 2:
        warn = (
            "endpoint of degree 2: prediction expected to remain valid, but "
            "absorbing the spurious vertex gives sharper estimates",
        )
    arg = (n_minus - n_plus) / (n_minus * n_plus - 1.0)
    arg = max(-_ATANH_CLAMP, min(_ATANH_CLAMP, arg))
    a_star = 0.5 * math.atanh(arg)
    k_coeff = 8.0 * internal_tie_factor(n_minus, n_plus)
    return _build(
        edge_id, "internal", ell_half, n_minus, n_plus, mu, k_coeff, 2.0, a_star,
        "soliton" if k_coeff == 0.0 else "cnoidal", warn,
    )


def predict_edge(g: MetricGraph, edge_id: str, mu: float) -> EdgeStatePrediction:
    """Classify an edge of g and predict its localized state at mu."""
    kind = classify_edge(g, edge_id)
    if isinstance(kind, Pendant):
        return predict_pendant(kind.length, max(kind.n, 1), mu, edge_id)
    if isinstance(kind, Loop):
        return predict_loop(kind.length_total / 2.0, kind.n, mu, edge_id)
    if isinstance(kind, Internal):
        return predict_internal(
            kind.length_total / 2.0, kind.n_minus, kind.n_plus, mu, edge_id
        )
    raise ValueError(f"edge {edge_id!r} is a half-line; no localized state")


def prediction_energy_at(pred: EdgeStatePrediction, mu: float) -> float:
    """Energy consistent with dE/dLambda = Lambda dQ/dLambda and E -> -m0 mu^3/3.

    Integrating dE/dmu = -mu^2 dQ/dmu from infinity against the closed-form
    mass gives, with a = 2 l,

        E(mu) = -m0 mu^3/3
                - q_coeff l e^{-a mu} (mu^4 + 2 mu^3/a + 6 mu^2/a^2
                                        + 12 mu/a^3 + 12/a^4).
    """
    a = 2.0 * pred.ell
    poly = (
        mu**4 + 2.0 * mu**3 / a + 6.0 * mu**2 / a**2 + 12.0 * mu / a**3 + 12.0 / a**4
    )
    return -pred.mass_leading * mu**3 / 3.0 - pred.q_coeff * pred.ell * math.exp(-a * mu) * poly


def prediction_branch(pred: EdgeStatePrediction, mus) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form branch (Lambda, Q, E) over a mu grid, exactly satisfying
    the fixed-Lambda differential identity."""
    mus = np.sort(np.asarray(mus, dtype=float))
    Q = np.array([pred.mass_at(m) for m in mus])
    E = np.array([prediction_energy_at(pred, m) for m in mus])
    return -(mus**2), Q, E


# -- exact matching refinement ---------------------------------------------------


def _graph_neumann(gc_scaled, pvals, ppw, smallness):
    # tight inner tolerance: the outer root find differentiates these values
    sol = nonlinear_dtn.remainder_dtn(
        gc_scaled, pvals, ppw=ppw, smallness=smallness, tol=1e-12
    )
    return sol.q


def refine_k_matching(
    g: MetricGraph,
    edge_id: str,
    mu: float,
    ppw: int = 50,
    smallness: float = nonlinear_dtn.DEFAULT_SMALLNESS,
) -> tuple[float, float]:
    """Solve the exact matching equations for (k, a) at the given mu.

    The single-bump branch supplies the edge side; the nonlinear DtN of the
    mu-scaled remainder graph supplies the graph side.  Pendants and loops
    reduce to bracketed root finding in k; internal edges run a two-variable
    Newton iteration in (k, a) seeded at the closed-form prediction.
    Raises when no root lies inside the single-bump window (mu too small).
    """
    kind = classify_edge(g, edge_id)
    if isinstance(kind, HalfLine):
        raise ValueError("cannot match on a half-line")
    gc = scale_graph(remainder_graph(g, edge_id), mu)

    if isinstance(kind, (Pendant, Loop)):
        bumps = 1.0 if isinstance(kind, Pendant) else 2.0
        length = kind.length if isinstance(kind, Pendant) else kind.length_total / 2.0
        L = mu * length
        (v,) = sorted(gc.boundary)
        lo, hi = nonlinear_dtn.single_bump_window(L)

        def mismatch(k):
            p, q = nonlinear_dtn._pq(L, k)
            qg = _graph_neumann(gc, {v: p}, ppw, smallness)[v]
            return -bumps * q - qg

        f_lo, f_hi = mismatch(lo), mismatch(hi)
        if not f_lo < 0.0 < f_hi:
            raise RuntimeError(
                f"no matching root inside the single-bump window at mu={mu}"
            )
        k = brentq(mismatch, lo, hi, xtol=1e-15)
        return k, 0.0

    # internal edge: match both endpoints with a shared modulus
    ell = kind.length_total / 2.0
    pred = predict_internal(ell, kind.n_minus, kind.n_plus, mu, edge_id)
    e = g.edge(edge_id)
    vm, vp = e.v1, e.v2
    L = mu * ell

    def system(k, a):
        p_m, q_m = nonlinear_dtn._pq(L + a, k)
        p_p, q_p = nonlinear_dtn._pq(L - a, k)
        qg = _graph_neumann(gc, {vm: p_m, vp: p_p}, ppw, smallness)
        return np.array([-q_m - qg[vm], -q_p - qg[vp]])

    k, a = pred.k, pred.a
    scale_k = max(abs(k - 1.0), 1e-12)
    tol_f = 1e-9 * math.exp(-L)
    converged = False
    for _ in range(40):
        F = system(k, a)
        if np.max(np.abs(F)) < tol_f:
            converged = True
            break
        dk = 1e-3 * scale_k
        da = 1e-6 + 1e-3 * abs(a)
        Fk = (system(k + dk, a) - system(k - dk, a)) / (2.0 * dk)
        Fa = (system(k, a + da) - system(k, a - da)) / (2.0 * da)
        J = np.column_stack([Fk, Fa])
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise RuntimeError("matching Jacobian singular; mu too small") from None
        k += step[0]
        a += step[1]
        if abs(step[0]) < 1e-15 * scale_k and abs(step[1]) < 1e-12:
            converged = True
            break
    if not converged:
        raise RuntimeError("internal matching did not converge")
    lo, hi = nonlinear_dtn.single_bump_window(L - abs(a))
    if not lo <= k <= hi:
        raise RuntimeError("matched modulus escaped the single-bump window")
    return float(k), float(a)


# -- ranking and existence ---------------------------------------------------------


@dataclass(frozen=True)
class RankedEdge:
    edge_id: str
    kind: str
    length: float            # pendant length, or total length for loop/internal
    n_minus: int
    n_plus: int | None
    tie_factor: float | None  # (N-2)/(N+2) or the internal sqrt product
    flags: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class RankReport:
    rule: str
    winner: str
    ordered: tuple[RankedEdge, ...]
    flags: tuple[str, ...] = field(default_factory=tuple)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= LENGTH_TIE_RTOL * max(abs(a), abs(b))


def rank_edges(g: MetricGraph, length_tie_rtol: float = LENGTH_TIE_RTOL) -> RankReport:
    """Order the finite edges by the energy of their localized state at large mass.

    Rules, in priority order: (i) the longest pendant, ties to fewest incident
    edges; (ii) the shortest loop with N = 1; (iii) any loop with N = 2,
    flagged as having no tie-breaker; (iv) the longest among loops with
    N >= 3 and internal edges, equal lengths ordered by the smaller
    incidence factor.  Defined for compact graphs only.
    """
    if not g.is_compact:
        raise ValueError(
            "ranking is defined for compact graphs; use ground_state_existence "
            "for graphs with half-lines"
        )
    if not g.finite_edges():
        raise ValueError("graph has no finite edges")

    pendants, loops1, loops2, bulk = [], [], [], []
    flags: list[str] = []
    for e in g.finite_edges():
        kind = classify_edge(g, e.id)
        if isinstance(kind, Pendant):
            pendants.append(RankedEdge(e.id, "pendant", kind.length, max(kind.n, 1), None, None))
        elif isinstance(kind, Loop):
            if kind.n == 1:
                loops1.append(RankedEdge(e.id, "loop", kind.length_total, 1, None, -1.0 / 3.0))
            elif kind.n == 2:
                loops2.append(RankedEdge(e.id, "loop", kind.length_total, 2, None, 0.0))
            else:
                bulk.append(
                    RankedEdge(
                        e.id, "loop", kind.length_total, kind.n, None,
                        (kind.n - 2.0) / (kind.n + 2.0),
                    )
                )
        elif isinstance(kind, Internal):
            fl = ()
            if min(kind.n_minus, kind.n_plus) < 2:
                fl = ("degree-2 endpoint: absorb for sharper comparison",)
            bulk.append(
                RankedEdge(
                    e.id, "internal", kind.length_total, kind.n_minus, kind.n_plus,
                    internal_tie_factor(kind.n_minus, kind.n_plus), fl,
                )
            )

    def mark_unordered_ties(entries, key):
        for a, b in zip(entries, entries[1:]):
            if key(a, b):
                flags.append(f"unresolved tie between {a.edge_id} and {b.edge_id}")

    pendants.sort(key=lambda r: (-r.length, r.n_minus, r.edge_id))
    loops1.sort(key=lambda r: (r.length, r.edge_id))
    loops2.sort(key=lambda r: r.edge_id)
    bulk.sort(key=lambda r: (-r.length, r.tie_factor, r.edge_id))

    if pendants:
        rule = "pendant"
        mark_unordered_ties(
            pendants[:2],
            lambda a, b: _close(a.length, b.length) and a.n_minus == b.n_minus,
        )
    elif loops1:
        rule = "loop-n1"
        mark_unordered_ties(loops1[:2], lambda a, b: _close(a.length, b.length))
    elif loops2:
        rule = "loop-n2"
        flags.append(
            "winning rule is a loop with N = 2: no tie-breaker exists at this order"
        )
    elif bulk:
        rule = "longest-among-n3-loops-and-internal"
        if len(bulk) > 1 and _close(bulk[0].length, bulk[1].length) and math.isclose(
            bulk[0].tie_factor, bulk[1].tie_factor, rel_tol=1e-12, abs_tol=1e-12
        ):
            flags.append(
                f"equal length and equal incidence factor between {bulk[0].edge_id} "
                f"and {bulk[1].edge_id}: not conclusive at this order"
            )
    else:
        raise ValueError("no rankable edges")

    ordered = tuple(pendants + loops1 + loops2 + bulk)
    return RankReport(rule=rule, winner=ordered[0].edge_id, ordered=ordered, flags=tuple(flags))


def ground_state_existence(g: MetricGraph) -> tuple[str, str]:
    """Classify ground-state existence at large mass: (verdict, note).

    Compact graphs always attain the minimizer.  Unbounded graphs attain it
    when a pendant or an N = 1 loop is present; with neither, an N = 2 loop
    leaves the question open, and otherwise no edge-localized state can be
    the ground state.
    """
    if g.is_compact:
        return "Exists", "compact graph: the constrained minimum is always attained"
    has_pendant = False
    has_loop1 = False
    has_loop2 = False
    for e in g.finite_edges():
        kind = classify_edge(g, e.id)
        if isinstance(kind, Pendant):
            has_pendant = True
        elif isinstance(kind, Loop):
            has_loop1 |= kind.n == 1
            has_loop2 |= kind.n == 2
    if has_pendant or has_loop1:
        return "Exists", "pendant or singly-attached loop carries mass above the soliton line"
    if has_loop2:
        return (
            "Inconclusive",
            "decisive edge is a loop attached to two edges (the graph unfolds "
            "to a line at leading order); higher-order terms would be needed",
        )
    return (
        "NotAmongEdgeStates",
        "no pendants and no loops attached to one or two edges: every "
        "edge-localized state stays below the soliton mass line",
    )
