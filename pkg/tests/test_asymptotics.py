import math

import numpy as np
import pytest

from qgnls.asymptotics import (
    ground_state_existence,
    internal_tie_factor,
    predict_edge,
    predict_internal,
    predict_loop,
    predict_pendant,
    prediction_branch,
    rank_edges,
    refine_k_matching,
)
from qgnls.metric_graph import Edge, MetricGraph, parse_graph


def dumbbell(k_internal=1, loop_len=2 * math.pi, edge_len=math.pi):
    edges = [Edge("lu", "u", "u", loop_len), Edge("lw", "w", "w", loop_len)]
    for i in range(k_internal):
        edges.append(Edge(f"c{i}", "u", "w", edge_len))
    return MetricGraph(("u", "w"), tuple(edges))


def tadpole(k=1, loop_len=2.0):
    edges = [Edge("ring", "v", "v", loop_len)]
    edges += [Edge(f"h{i}", "v", None, None) for i in range(k)]
    return MetricGraph(("v",), tuple(edges))


# -- closed forms -----------------------------------------------------------------

def test_pendant_n1_trivial():
    p = predict_pendant(1.0, 1, 4.0)
    assert p.k == 1.0
    assert p.Q == pytest.approx(4.0)
    assert p.regime == "soliton"


def test_pendant_n3_values():
    mu, ell = 5.0, 1.0
    p = predict_pendant(ell, 3, mu)
    assert p.k - 1.0 == pytest.approx(4.0 * math.exp(-10.0), rel=1e-14)
    assert p.Q == pytest.approx(mu - 4.0 * mu * mu * math.exp(-10.0), rel=1e-14)
    # leading forms combine to E ~ -Q^3/3 up to the exponential correction
    assert p.E / (-p.Q**3 / 3.0) == pytest.approx(1.0, rel=1e-2)


def test_loop_coefficients():
    mu, ell = 5.0, 1.0
    n2 = predict_loop(ell, 2, mu)
    assert n2.k == 1.0 and n2.Q == pytest.approx(2 * mu)
    assert n2.regime == "undetermined"
    n1 = predict_loop(ell, 1, mu)
    assert n1.Q > 2 * mu and n1.k < 1.0 and n1.regime == "dnoidal"
    n3 = predict_loop(ell, 3, mu)
    want = 2 * mu - (16.0 / 5.0) * mu * mu * ell * math.exp(-10.0)
    assert n3.Q == pytest.approx(want, rel=1e-14)
    assert n3.regime == "cnoidal"


def test_internal_offset_and_coefficients():
    s = predict_internal(1.0, 4, 4, 3.0)
    assert s.a == 0.0
    hetero = predict_internal(1.0, 3, 2, 3.0)
    assert hetero.a == pytest.approx(0.5 * math.atanh(0.2), rel=1e-14)
    assert hetero.a > 0.0  # maximum shifted toward the lower-degree side v+
    with pytest.raises(ValueError, match="singular"):
        predict_internal(1.0, 1, 1, 3.0)
    warned = predict_internal(1.0, 2, 1, 3.0)
    assert warned.warnings


def test_specialization_to_reported_coefficients():
    # dumbbell with K internal edges: internal coefficient 16K/(K+2),
    # loop coefficient 16(K-2)/(K+2); symmetric chain internal: 16/3
    for K in (1, 2, 3, 5):
        internal = predict_internal(1.0, K + 1, K + 1, 3.0)
        assert -internal.q_coeff == pytest.approx(16.0 * K / (K + 2), rel=1e-12)
        loop = predict_loop(1.0, K, 3.0)
        assert -loop.q_coeff == pytest.approx(16.0 * (K - 2) / (K + 2), rel=1e-12)
    chain = predict_internal(1.0, 2, 2, 3.0)
    assert -chain.q_coeff == pytest.approx(16.0 / 3.0, rel=1e-12)


def test_mass_monotone_and_warning_guard():
    p = predict_pendant(1.0, 3, 6.0)
    mus = np.linspace(5.0, 9.0, 41)
    qs = [p.mass_at(m) for m in mus]
    assert np.all(np.diff(qs) > 0)
    assert p.warnings == ()
    small_mu = predict_loop(0.3, 5, 1.0)
    assert any("untrustworthy" in w for w in small_mu.warnings)


def test_predict_edge_dispatch():
    g = dumbbell(k_internal=3)
    loop = predict_edge(g, "lu", 3.0)
    assert loop.kind == "loop" and loop.n_minus == 3
    inner = predict_edge(g, "c0", 3.0)
    assert inner.kind == "internal" and (inner.n_minus, inner.n_plus) == (4, 4)
    with pytest.raises(ValueError, match="half-line"):
        predict_edge(tadpole(1), "h0", 3.0)


def test_prediction_branch_differential_identity():
    pred = predict_loop(1.0, 1, 4.0)
    mus = np.linspace(3.0, 5.0, 21)
    lam, Q, E = prediction_branch(pred, mus)
    dE = np.gradient(E, lam)
    dQ = np.gradient(Q, lam)
    mid = slice(2, -2)
    assert np.allclose(dE[mid], lam[mid] * dQ[mid], rtol=1e-3)


def test_lemma_sign_relation_on_closed_forms():
    # same leading mass, ordered Q at fixed mu  =>  opposite E order at fixed mass
    mus = np.linspace(2.5, 4.0, 25)
    p1 = predict_loop(math.pi, 1, 3.0)        # Q > 2 mu
    p2 = predict_internal(math.pi / 2, 2, 2, 3.0)  # Q < 2 mu
    lam1, Q1, E1 = prediction_branch(p1, mus)
    lam2, Q2, E2 = prediction_branch(p2, mus)
    assert np.all(Q1 > Q2)
    q = 0.5 * (max(Q2[0], Q1[0]) + min(Q2[-1], Q1[-1]))
    E1q = np.interp(q, Q1, E1)
    E2q = np.interp(q, Q2, E2)
    assert E1q < E2q  # larger mass at fixed Lambda wins at fixed mass


def test_pendant_beats_nonpendant_at_large_mass():
    qs = np.linspace(8.0, 20.0, 5)
    for q in qs:
        ep = -q**3 / 3.0
        enp = -q**3 / 12.0
        assert ep < enp


# -- ranking -----------------------------------------------------------------------

def test_rank_pendant_wins_regardless_of_length():
    # short pendant vs long loop and long internal cycle edges
    g = parse_graph(
        "vertex c\nvertex p\nvertex t1\nvertex t2\n"
        "edge pe p c 0.5\nedge e1 c t1 4.0\nedge e2 t1 t2 4.0\nedge e3 t2 c 4.0\n"
        "loop big c 9.0\n"
    )
    r = rank_edges(g)
    assert r.rule == "pendant" and r.winner == "pe"


def test_rank_dumbbell_k1_loop_wins():
    r = rank_edges(dumbbell(1))
    assert r.rule == "loop-n1"
    assert r.winner in ("lu", "lw")
    assert any("unresolved tie" in f for f in r.flags)  # two identical loops


def test_rank_loop_n1_prefers_shortest():
    g = MetricGraph(
        ("u", "w"),
        (Edge("la", "u", "u", 3.0), Edge("lb", "w", "w", 2.0), Edge("c", "u", "w", 1.0)),
    )
    r = rank_edges(g)
    assert r.rule == "loop-n1" and r.winner == "lb"


def test_rank_loop_n2_flagged():
    r = rank_edges(dumbbell(2))
    assert r.rule == "loop-n2"
    assert any("no tie-breaker" in f for f in r.flags)


def test_rank_dumbbell_k3_long_internal_edges():
    short = rank_edges(dumbbell(3, loop_len=2 * math.pi, edge_len=math.pi))
    assert short.rule == "longest-among-n3-loops-and-internal"
    assert short.winner in ("lu", "lw")  # loops are longer
    long = rank_edges(dumbbell(3, loop_len=2 * math.pi, edge_len=4 * math.pi))
    assert long.winner in ("c0", "c1", "c2")


def test_rank_equal_length_tie_factor():
    # same total length: loop with N = 3 (factor 1/5) vs internal edge with
    # N- = 4, N+ = 2 (factor sqrt(3/5 * 1/3) ~ 0.447); the loop wins the tie
    g = MetricGraph(
        ("u", "w"),
        (
            Edge("loop3", "u", "u", 4.0),
            Edge("i1", "u", "w", 4.0),
            Edge("i2", "u", "w", 1.0),
            Edge("i3", "u", "w", 1.0),
        ),
    )
    # degrees: u = 2 + 3 = 5, w = 3
    r = rank_edges(g)
    assert r.rule == "longest-among-n3-loops-and-internal"
    top = [e for e in r.ordered if e.length == 4.0]
    assert [e.edge_id for e in top] == ["loop3", "i1"]
    assert (3 - 2) / (3 + 2) < internal_tie_factor(4, 2)


def test_rank_scaling_invariance():
    g1 = dumbbell(3, loop_len=2 * math.pi, edge_len=math.pi)
    g2 = dumbbell(3, loop_len=14 * math.pi, edge_len=7 * math.pi)
    r1, r2 = rank_edges(g1), rank_edges(g2)
    assert [e.edge_id for e in r1.ordered] == [e.edge_id for e in r2.ordered]
    assert r1.rule == r2.rule


def test_rank_rejects_unbounded_and_empty():
    with pytest.raises(ValueError, match="compact"):
        rank_edges(tadpole(1))


# -- ground state -----------------------------------------------------------------

def test_ground_state_tadpoles():
    assert ground_state_existence(tadpole(1))[0] == "Exists"
    verdict, note = ground_state_existence(tadpole(2))
    assert verdict == "Inconclusive" and "unfolds" in note
    assert ground_state_existence(tadpole(3))[0] == "NotAmongEdgeStates"


def test_ground_state_compact_and_pendant():
    assert ground_state_existence(dumbbell(1))[0] == "Exists"
    g = MetricGraph(
        ("c", "p"), (Edge("pe", "c", "p", 1.0), Edge("h", "c", None, None))
    )
    assert ground_state_existence(g)[0] == "Exists"


# -- matching refinement ------------------------------------------------------------

def star_with_pendant(pendant_len=1.5, arm_len=1.0, arms=3):
    verts = ["c", "p"] + [f"t{i}" for i in range(arms)]
    edges = [Edge("pend", "p", "c", pendant_len)]
    edges += [Edge(f"e{i}", "c", f"t{i}", arm_len) for i in range(arms)]
    return MetricGraph(tuple(verts), tuple(edges))


@pytest.mark.parametrize("mu", [5.0, 6.0])
def test_refine_pendant_matches_closed_form(mu):
    g = star_with_pendant()
    k, a = refine_k_matching(g, "pend", mu)
    assert a == 0.0
    predicted = 8.0 * (2.0 / 4.0) * math.exp(-2.0 * mu * 1.5)
    assert 0.9 <= (k - 1.0) / predicted <= 1.1


def test_refine_symmetric_internal_centered():
    g = MetricGraph(
        ("u", "w", "a1", "a2", "b1", "b2"),
        (
            Edge("mid", "u", "w", 2.0),
            Edge("ua1", "u", "a1", 1.0),
            Edge("ua2", "u", "a2", 1.0),
            Edge("wb1", "w", "b1", 1.0),
            Edge("wb2", "w", "b2", 1.0),
        ),
    )
    k, a = refine_k_matching(g, "mid", 5.0)
    assert abs(a) < 1e-8
    predicted = 8.0 * internal_tie_factor(2, 2) * math.exp(-2.0 * 5.0)
    assert 0.85 <= (k - 1.0) / predicted <= 1.15


def test_refine_loop_n1_dnoidal():
    g = MetricGraph(
        ("v", "t"), (Edge("ring", "v", "v", 2.0), Edge("tail", "v", "t", 1.2))
    )
    k, a = refine_k_matching(g, "ring", 5.0)
    assert k < 1.0
    predicted = -(8.0 / 3.0) * math.exp(-2.0 * 5.0)
    assert 0.9 <= (k - 1.0) / predicted <= 1.1
