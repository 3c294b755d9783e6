"""Jacobi elliptic functions over the extended modulus range k in (0, sqrt(2)).

The sign-definite periodic solutions of -y'' + y - 2 y^3 = 0 with y'(0) = 0
form a single family

    dnoidal_profile(z, k) = dn(z / sqrt(2 - k^2); k) / sqrt(2 - k^2),

where k < 1 gives dnoidal waves, k = 1 the sech soliton, and k in (1, sqrt(2))
the sign-indefinite cnoidal waves through the real modulus transformation
kappa = 1/k (no complex arithmetic is ever needed):

    sn(u; k) = sn(k u; 1/k) / k,   cn(u; k) = dn(k u; 1/k),
    dn(u; k) = cn(k u; 1/k).

Complete integrals use the arithmetic-geometric mean; sn/cn/dn use the
descending Landen (Gauss) transformation in its AGM backward-recurrence form.
Both are accurate to near machine precision even for 1 - k^2 ~ 1e-12, which
is where the edge-localized constructions live.  Within 1 - k^2 < 1e-12 of
the soliton the exact hyperbolic limits are used instead.
"""

from __future__ import annotations

import math

__all__ = [
    "SOLITON_SWITCH",
    "complete_K",
    "complete_E",
    "jacobi",
    "dnoidal_profile",
    "dnoidal_slope",
    "dk_jacobi",
]

# Switch to the hyperbolic (soliton) branch when |1 - k^2| falls below this.
SOLITON_SWITCH = 1e-12

_TOL = 3e-16  # AGM termination; below this a and b are equal to rounding
_MAXIT = 40


def _complement(k: float) -> float:
    # (1-k)(1+k) avoids the cancellation in 1 - k*k for k near 1
    return (1.0 - k) * (1.0 + k)


def _check_modulus(k: float) -> None:
    if not 0.0 <= k < 1.0:
        raise ValueError(f"modulus must lie in [0, 1), got {k}")


def complete_K(k: float) -> float:
    """Complete elliptic integral of the first kind, K(k), for 0 <= k < 1."""
    _check_modulus(k)
    a, b = 1.0, math.sqrt(_complement(k))
    for _ in range(_MAXIT):
        if abs(a - b) <= _TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def complete_E(k: float) -> float:
    """Complete elliptic integral of the second kind, E(k), for 0 <= k < 1."""
    _check_modulus(k)
    a, b = 1.0, math.sqrt(_complement(k))
    s = 0.5 * k * k
    p = 1.0
    for _ in range(_MAXIT):
        if abs(a - b) <= _TOL * a:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        p *= 2.0
        s += 0.5 * p * c * c
    return math.pi / (2.0 * a) * (1.0 - s)


def _jacobi_agm(u: float, k: float) -> tuple[float, float, float]:
    """sn, cn, dn for 0 < k < 1 via the AGM backward recurrence."""
    mc = _complement(k)
    em: list[float] = []
    en: list[float] = []
    a, dn = 1.0, 1.0
    c = 1.0
    for _ in range(20):
        em.append(a)
        mc = math.sqrt(mc)
        en.append(mc)
        c = 0.5 * (a + mc)
        if abs(a - mc) <= _TOL * a:
            break
        mc = a * mc
        a = c
    uu = c * u
    sn, cn = math.sin(uu), math.cos(uu)
    if abs(uu) < 1e-100:  # cot(uu) below would overflow; series is exact here
        return u, 1.0, 1.0
    if sn != 0.0:
        aa = cn / sn
        cc = aa * c
        for i in range(len(em) - 1, -1, -1):
            b = em[i]
            aa = cc * aa
            cc = dn * cc
            dn = (en[i] + aa) / (b + aa)
            aa = cc / b
        aa = 1.0 / math.sqrt(cc * cc + 1.0)
        sn = aa if sn >= 0 else -aa
        cn = cc * sn
    return sn, cn, dn


def jacobi(u: float, k: float) -> tuple[float, float, float]:
    """Jacobi triple (sn, cn, dn) at argument u for modulus k in (0, sqrt(2)).

    k exponentially close to 1 (|1 - k^2| < SOLITON_SWITCH) returns the exact
    hyperbolic limits sn = tanh, cn = dn = sech; k > 1 is evaluated through
    the real transformation with kappa = 1/k.
    """
    if not 0.0 <= k < math.sqrt(2.0):
        raise ValueError(f"modulus must lie in [0, sqrt(2)), got {k}")
    if abs(_complement(k)) < SOLITON_SWITCH:
        t = math.tanh(u)
        s = 1.0 / math.cosh(u)
        return t, s, s
    if k < 1.0:
        return _jacobi_agm(u, k)
    kappa = 1.0 / k
    sn, cn, dn = _jacobi_agm(k * u, kappa)
    return sn / k, dn, cn


def dnoidal_profile(z: float, k: float) -> float:
    """Single-family profile dn(z / sqrt(2-k^2); k) / sqrt(2-k^2).

    Solves -y'' + y - 2 y^3 = 0 with y'(0) = 0, y(0) = 1/sqrt(2-k^2);
    equals sech(z) at k = 1 and the cnoidal wave with kappa = 1/k for k > 1.
    """
    s = math.sqrt(2.0 - k * k)
    return jacobi(z / s, k)[2] / s


def dnoidal_slope(z: float, k: float) -> float:
    """d/dz of dnoidal_profile, from dn' = -k^2 sn cn."""
    s = math.sqrt(2.0 - k * k)
    sn, cn, _ = jacobi(z / s, k)
    return -(k * k) / (s * s) * sn * cn


def _dk_soliton(u: float) -> tuple[float, float, float]:
    sh, ch = math.sinh(u), math.cosh(u)
    sech = 1.0 / ch
    bracket = sh * ch - u
    dsn = -0.5 * bracket * sech * sech
    dcn = 0.5 * bracket * math.tanh(u) * sech
    ddn = -0.5 * (sh * ch + u) * math.tanh(u) * sech
    return dsn, dcn, ddn


def dk_jacobi(u: float, k: float, h: float = 1e-5) -> tuple[float, float, float]:
    """Partial derivatives of (sn, cn, dn) with respect to the modulus.

    At k = 1 (within the soliton switch) the exact closed forms are returned;
    elsewhere centered differences with step h, balanced against cancellation.
    """
    if abs(_complement(k)) < SOLITON_SWITCH:
        return _dk_soliton(u)
    hi = jacobi(u, k + h)
    lo = jacobi(u, k - h)
    return tuple((a - b) / (2.0 * h) for a, b in zip(hi, lo))
