"""Nonlinear Dirichlet-to-Neumann manifolds for the scaled stationary NLS.

Three views of the same object:

* ``trace_edge_manifold`` integrates -y'' + y - 2 y^3 = 0 across an interval
  with a Neumann start, sweeping the initial amplitude (shooting picture).

* ``SingleBumpBranch`` parametrizes the positive strictly-decreasing part of
  the interval manifold by the elliptic modulus k.  It exists exactly for
  k in (k_minus, k_plus): k_minus solves L = sqrt(2-k^2) K(k) (slope turns
  nonnegative below), k_plus makes the endpoint value vanish on the k > 1
  side.  Both boundaries behave like 1 -+ 8 exp(-2L) for large L.

* ``remainder_dtn`` solves the full nonlinear boundary value problem with
  small Dirichlet data on a (mu-scaled) remainder graph by damped Newton on
  the finite-difference discretization, seeded with the linear solution.
  Small solutions stay below 1/sqrt(2) and attain their maximum on the
  boundary; ``validate_small_solution`` audits exactly that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import elliptic
from .fdgrid import GraphGrid, build_grid
from .linear_dtn import solve_linear_bvp
from .metric_graph import MetricGraph

__all__ = [
    "DtnSample",
    "SingleBumpBranch",
    "SmallSolution",
    "trace_edge_manifold",
    "single_bump_window",
    "single_bump_values",
    "single_bump_derivatives",
    "remainder_dtn",
    "validate_small_solution",
    "DEFAULT_SMALLNESS",
]

DEFAULT_SMALLNESS = 0.1  # |p| threshold for the almost-linear regime
_WINDOW_SLACK = 1e-9     # tolerance when checking k against the window


@dataclass(frozen=True)
class DtnSample:
    p: float
    q: float
    amplitude: float          # initial value y(0) generating the sample
    regime: str               # "dnoidal" | "soliton" | "cnoidal" | "zero" | ...
    divergent: bool = False
    drift: float = 0.0        # | (y')^2 - y^2 + y^4 | drift, integration proxy


def _regime_of_amplitude(a: float) -> str:
    if a == 0.0:
        return "zero"
    x = abs(a)
    if x == 1.0:
        return "soliton"
    if x == 1.0 / math.sqrt(2.0):
        return "constant"
    return "dnoidal" if x < 1.0 else "cnoidal"


def trace_edge_manifold(L: float, amplitudes) -> list[DtnSample]:
    """Shoot -y'' + y - 2 y^3 = 0 from y(0) = a, y'(0) = 0 to z = L.

    Returns one (p, q) = (y(L), y'(L)) sample per amplitude.  The conserved
    quantity (y')^2 - y^2 + y^4 is monitored; its drift is reported as an
    integration-quality proxy.  Samples whose integration fails are marked
    divergent instead of raising.
    """
    if not L > 0:
        raise ValueError("interval length must be positive")

    def rhs(_z, y):
        return (y[1], y[0] - 2.0 * y[0] ** 3)

    out = []
    for a in np.atleast_1d(np.asarray(amplitudes, dtype=float)):
        sol = solve_ivp(
            rhs, (0.0, L), (a, 0.0), method="RK45", rtol=1e-11, atol=1e-11,
        )
        if not sol.success:
            out.append(DtnSample(math.nan, math.nan, a, _regime_of_amplitude(a), True))
            continue
        p, q = sol.y[0, -1], sol.y[1, -1]
        h0 = -a * a + a**4
        drift = abs((q * q - p * p + p**4) - h0)
        out.append(DtnSample(p, q, a, _regime_of_amplitude(a), False, drift))
    return out


# -- single-bump branch --------------------------------------------------------


def _pq(L: float, k: float) -> tuple[float, float]:
    """Endpoint value and slope of the dnoidal family, no window check."""
    s = math.sqrt(2.0 - k * k)
    sn, cn, dn = elliptic.jacobi(L / s, k)
    p = dn / s
    q = -(k * k) / (s * s) * sn * cn
    return p, q


def _window_threshold() -> float:
    # below this L the q <= 0 bracket (0.5, 1) cannot close
    return math.sqrt(2.0 - 0.25) * elliptic.complete_K(0.5)


def single_bump_window(L: float) -> tuple[float, float]:
    """Modulus window (k_minus, k_plus) of single-bump solutions on [0, L].

    k_minus is the root of L = sqrt(2-k^2) K(k) in (0.5, 1); k_plus is the
    root of L = sqrt(2-k^2) K(1/k) / k in (1, sqrt(2)).  Bisection is run to
    1e-14 absolute.  Raises for L below the solvability threshold.
    """
    if not L > _window_threshold():
        raise ValueError(
            f"no single-bump window: need L > {_window_threshold():.3f}, got {L}"
        )

    def f_minus(k):
        return math.sqrt(2.0 - k * k) * elliptic.complete_K(k) - L

    def f_plus(k):
        return math.sqrt(2.0 - k * k) * elliptic.complete_K(1.0 / k) / k - L

    below = np.nextafter(1.0, 0.0)
    above = np.nextafter(1.0, 2.0)
    # for very large L the boundaries sit within an ulp of 1: the window
    # degenerates to the representable neighbourhood of the soliton
    k_minus = below if f_minus(below) <= 0 else brentq(f_minus, 0.5, below, xtol=1e-14)
    k_plus = above if f_plus(above) <= 0 else brentq(
        f_plus, above, math.sqrt(2.0) - 1e-9, xtol=1e-14
    )
    return float(k_minus), float(k_plus)


def single_bump_values(L: float, k: float) -> tuple[float, float]:
    """(p_L, q_L) of the single-bump solution with modulus k on [0, L]."""
    lo, hi = single_bump_window(L)
    if not (lo - _WINDOW_SLACK <= k <= hi + _WINDOW_SLACK):
        raise ValueError(f"k={k!r} outside the single-bump window ({lo!r}, {hi!r})")
    return _pq(L, k)


def single_bump_derivatives(L: float, k: float) -> tuple[float, float]:
    """Centered-difference (dp/dk, dq/dk); both behave like -exp(L)/4."""
    width = 16.0 * math.exp(-2.0 * L)
    h = max(1e-12, 1e-2 * width)
    p_hi, q_hi = _pq(L, k + h)
    p_lo, q_lo = _pq(L, k - h)
    return (p_hi - p_lo) / (2.0 * h), (q_hi - q_lo) / (2.0 * h)


@dataclass(frozen=True)
class SingleBumpBranch:
    """Single-bump piece of the interval DtN manifold, parametrized by k."""

    L: float
    k_minus: float = field(init=False)
    k_plus: float = field(init=False)

    def __post_init__(self):
        lo, hi = single_bump_window(self.L)
        object.__setattr__(self, "k_minus", lo)
        object.__setattr__(self, "k_plus", hi)

    def values(self, k: float) -> tuple[float, float]:
        return single_bump_values(self.L, k)

    def derivatives(self, k: float) -> tuple[float, float]:
        return single_bump_derivatives(self.L, k)

    def sample(self, k: float) -> DtnSample:
        p, q = self.values(k)
        regime = "soliton" if k == 1.0 else ("dnoidal" if k < 1.0 else "cnoidal")
        return DtnSample(p, q, 1.0 / math.sqrt(2.0 - k * k), regime)


# -- remainder graph: small nonlinear solutions ---------------------------------


@dataclass
class SmallSolution:
    grid: GraphGrid
    values: np.ndarray
    p: dict[str, float]
    q: dict[str, float]
    sup_norm: float
    newton_iterations: int
    residual: float


def _dirichlet_newton(grid: GraphGrid, p: dict[str, float], u0, tol, maxit):
    """Damped Newton for (-Delta + 1) u = 2 u^3 with Dirichlet rows at B."""
    K = grid.stiffness(robin_coeff=1.0)
    w = grid.weights
    bidx = np.array([grid.vertex_index[v] for v in sorted(p)], dtype=int)
    bval = np.array([p[v] for v in sorted(p)])
    free = np.ones(grid.size, dtype=bool)
    free[bidx] = False

    def residual(u):
        r = K @ u + w * (u - 2.0 * u**3)
        r[bidx] = 0.0
        return r

    u = u0.copy()
    u[bidx] = bval
    r = residual(u)
    rn = np.max(np.abs(r))
    for it in range(maxit):
        if rn < tol:
            return u, it, rn
        J = (K + sp.diags(w * (1.0 - 6.0 * u**2))).tolil()
        for i in bidx:
            J.rows[i], J.data[i] = [int(i)], [1.0]
        step = spla.splu(J.tocsc()).solve(-r)
        alpha = 1.0
        for _ in range(40):
            cand = u + alpha * step
            rc = residual(cand)
            rcn = np.max(np.abs(rc))
            if rcn < (1.0 - 0.25 * alpha) * rn:
                u, r, rn = cand, rc, rcn
                break
            alpha *= 0.5
        else:
            raise RuntimeError(
                f"Newton stalled at residual {rn:.2e} (boundary data too large?)"
            )
    raise RuntimeError(f"Newton did not converge in {maxit} iterations (res={rn:.2e})")


def _boundary_flux(grid: GraphGrid, u: np.ndarray, v: str) -> float:
    """O(h^2) out-of-graph Neumann data at vertex v for (-Delta+1)u = 2u^3."""
    g = grid.graph
    q = 0.0
    for eid, eg in grid.edges.items():
        e = g.edge(eid)
        ends = []
        if e.v1 == v:
            ends.append(0)
        if e.v2 == v:
            ends.append(1)
        for end in ends:
            i0, i1 = (eg.idx[0], eg.idx[1]) if end == 0 else (eg.idx[-1], eg.idx[-2])
            u0, u1 = u[i0], u[i1]
            q += (u0 - u1) / eg.h + 0.5 * eg.h * (u0 - 2.0 * u0**3)
    return q


def remainder_dtn(
    gc_scaled: MetricGraph,
    p: dict[str, float],
    ppw: int = 50,
    smallness: float = DEFAULT_SMALLNESS,
    tol: float = 1e-10,
    maxit: int = 50,
) -> SmallSolution:
    """Small solution of the nonlinear BVP on a mu-scaled remainder graph.

    ``p`` maps the boundary vertices to Dirichlet values, all below the
    smallness threshold.  Newton starts from the exact linear solution and
    must reach the residual tolerance; the result is validated against the
    uniform bound before returning.
    """
    if set(p) != set(gc_scaled.boundary):
        raise ValueError("p must be indexed exactly by the boundary vertices")
    pmax = max((abs(x) for x in p.values()), default=0.0)
    if pmax > smallness:
        raise ValueError(f"boundary data {pmax:.3g} exceeds smallness threshold {smallness}")

    grid = build_grid(gc_scaled, 1.0 / ppw)
    u0 = np.zeros(grid.size)
    if pmax > 0.0 and gc_scaled.edges:
        lin = solve_linear_bvp(gc_scaled, p)
        for eid, eg in grid.edges.items():
            u0[eg.idx] = lin.edge_values(eid, eg.x)
    for v, val in p.items():
        u0[grid.vertex_index[v]] = val

    u, iters, res = _dirichlet_newton(grid, p, u0, tol, maxit)
    sup = float(np.max(np.abs(u)))
    if sup >= 1.0 / math.sqrt(2.0):
        raise RuntimeError(
            f"solution sup-norm {sup:.4f} violates the 1/sqrt(2) bound; data too large"
        )
    q = {v: _boundary_flux(grid, u, v) for v in p}
    return SmallSolution(grid, u, dict(p), q, sup, iters, res)


def validate_small_solution(sol: SmallSolution, tol: float | None = None) -> list[str]:
    """Audit a remainder solution; returns a list of violation messages.

    Checks the uniform bound, boundary-attained maximum, absence of interior
    strict local maxima of |u| (up to an O(h^2) discretization allowance) and
    nonnegativity under nonnegative data.
    """
    grid, u = sol.grid, sol.values
    sup = float(np.max(np.abs(u))) if u.size else 0.0
    out = []
    if sup >= 1.0 / math.sqrt(2.0):
        out.append(f"sup-norm {sup:.4f} >= 1/sqrt(2)")
    bidx = [grid.vertex_index[v] for v in sol.p]
    bmax = max((abs(u[i]) for i in bidx), default=0.0)
    if tol is None:
        hmax = max((eg.h for eg in grid.edges.values()), default=1.0)
        tol = 10.0 * hmax * hmax * max(sup, 1e-30)
    if sup > bmax + tol:
        out.append(f"maximum {sup:.3e} not attained on the boundary ({bmax:.3e})")
    for eid, eg in grid.edges.items():
        a = np.abs(u[eg.idx])
        interior = a[1:-1]
        if interior.size and np.any(
            (interior > a[:-2] + tol) & (interior > a[2:] + tol)
        ):
            out.append(f"interior local maximum of |u| on edge {eid}")
    # interior NK vertices must not carry a strict local maximum either
    neighbours: dict[int, list[int]] = {}
    for eg in grid.edges.values():
        neighbours.setdefault(int(eg.idx[0]), []).append(int(eg.idx[1]))
        neighbours.setdefault(int(eg.idx[-1]), []).append(int(eg.idx[-2]))
    for v, i in grid.vertex_index.items():
        if v in sol.p or i not in neighbours:
            continue
        if all(abs(u[i]) > abs(u[j]) + tol for j in neighbours[i]):
            out.append(f"interior local maximum of |u| at vertex {v}")
    if all(v >= 0.0 for v in sol.p.values()) and np.min(u) < -tol:
        out.append(f"negative values (min {np.min(u):.3e}) under nonnegative data")
    return out
