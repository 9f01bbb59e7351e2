"""C^∞ flat transition used to join two affine pieces.

sigma(u) = psi(u) / (psi(u) + psi(1-u)),  psi(u) = exp(-1/u),
is the standard flat step from 0 to 1 on [0, 1].  The join profile is the
two-stage step

    S(t) = sigma(2t) / 2            for t <= 1/2,
    S(t) = 1/2 + sigma(2t - 1) / 2  for t >= 1/2,

which is still C^∞, monotone and flat at 0, 1/2 and 1.  Its integral
F(t) = ∫_0^t S has the exact values F(1/2) = 1/8 and F(1) = 1/2 (sigma is
symmetric, so ∫_0^1 sigma = 1/2); this is what keeps every affine intercept
of a joined map rational.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mp, mpf

import numpy as np

from .jets import ArrayJet, Jet, compose

# Working precision of the local (cell-coordinate) evaluations.
LOCAL_BITS = 128

_PANELS = [0.01, 0.02, 0.04, 0.08, 0.14, 0.22, 0.32, 0.42, 0.5]
_FIT_DEGREE = 44
_TINY = mpf("0.01")


def sigma(u):
    u = mpf(u)
    if u <= 0:
        return mpf(0)
    if u >= 1:
        return mpf(1)
    a = mp.exp(-1 / u)
    b = mp.exp(-1 / (1 - u))
    return a / (a + b)


def sigma_jet(u, order: int) -> Jet:
    u = mpf(u)
    if u <= 0:
        return Jet.constant(0, order)
    if u >= 1:
        return Jet.constant(1, order)
    x = Jet.variable(u, order)
    a = (-(x.reciprocal())).exp()
    b = (-((1 - x).reciprocal())).exp()
    return a / (a + b)


@lru_cache(maxsize=None)
def _sigma_integral_table(bits: int):
    """Piecewise antiderivative of sigma on [0.01, 0.5] from Chebyshev fits."""
    with mp.workprec(bits + 64):
        panels = []
        acc = _tiny_integral(mpf(_PANELS[0]))
        for a, b in zip(_PANELS[:-1], _PANELS[1:]):
            a, b = mpf(a), mpf(b)
            # fit in the centred variable s in [-1, 1] for conditioning
            mid, half = (a + b) / 2, (b - a) / 2
            poly, _err = mpmath.chebyfit(lambda s: sigma(mid + half * s), [-1, 1], _FIT_DEGREE, error=True)
            deg = len(poly) - 1
            anti = [c * half / (deg - i + 1) for i, c in enumerate(poly)] + [mpf(0)]
            base = acc - mpmath.polyval(anti, -1)
            panels.append((a, b, mid, half, anti, base))
            acc = base + mpmath.polyval(anti, 1)
        return panels


def _tiny_integral(u):
    # ∫_0^u exp(-1/v) dv ~ u^2 e^{-1/u} (1 - 2u + 6u^2); below 2^-140 at u = 0.01
    if u <= 0:
        return mpf(0)
    return u * u * mp.exp(-1 / u) * (1 - 2 * u + 6 * u * u)


def sigma_integral(u):
    """Σ(u) = ∫_0^u sigma, accurate to about 2^-LOCAL_BITS."""
    u = mpf(u)
    if u <= 0:
        return mpf(0)
    if u >= 1:
        return u - mpf(1) / 2
    if u > mpf(1) / 2:
        return u - mpf(1) / 2 + sigma_integral(1 - u)
    if u < _TINY:
        return _tiny_integral(u)
    for a, b, mid, half, anti, base in _sigma_integral_table(LOCAL_BITS):
        if u <= b:
            return base + mpmath.polyval(anti, (u - mid) / half)
    raise AssertionError("unreachable")


def step(t):
    """The two-stage join profile S(t)."""
    t = mpf(t)
    if t <= mpf(1) / 2:
        return sigma(2 * t) / 2
    return (1 + sigma(2 * t - 1)) / 2


def step_jet(t, order: int) -> Jet:
    t = mpf(t)
    inner = Jet.variable(t, order) * 2
    if t <= mpf(1) / 2:
        return compose(sigma_jet(2 * t, order), inner) * mpf(0.5)
    return (compose(sigma_jet(2 * t - 1, order), inner - 1) + 1) * mpf(0.5)


def step_integral(t):
    """F(t) = ∫_0^t S."""
    t = mpf(t)
    if t <= 0:
        return mpf(0)
    if t >= 1:
        return t - mpf(1) / 2
    if t <= mpf(1) / 2:
        return sigma_integral(2 * t) / 4
    return mpf(1) / 8 + (t - mpf(1) / 2) / 2 + sigma_integral(2 * t - 1) / 4


def step_integral_exact(t: Fraction):
    """Exact F(t) at the rational nodes where it is known, else None."""
    if t <= 0:
        return Fraction(0)
    if t >= 1:
        return t - Fraction(1, 2)
    if t == Fraction(1, 2):
        return Fraction(1, 8)
    return None


def step_integral_jet(t, order: int) -> Jet:
    """Jet of F at t (value from the integral, higher terms from S)."""
    s = step_jet(t, max(order - 1, 0))
    coeffs = [step_integral(t)] + [s.c[k - 1] / k for k in range(1, order + 1)]
    return Jet(coeffs)


# ---- float64 array versions, used only by grid-based norm estimates ----

_U_MIN = 0.002  # below this sigma and all its derivatives are < 1e-200


def sigma_jet_array(u, order: int) -> ArrayJet:
    u = np.asarray(u, dtype=float)
    inside = (u > _U_MIN) & (u < 1 - _U_MIN)
    uc = np.clip(u, _U_MIN, 1 - _U_MIN)
    x = ArrayJet.variable(uc, order)
    a = (-(x.reciprocal())).exp()
    b = (-((1 - x).reciprocal())).exp()
    s = a / (a + b)
    c = [np.where(inside, v, 0.0) for v in s.c]
    c[0] = np.where(inside, c[0], np.where(u >= 1 - _U_MIN, 1.0, 0.0))
    return ArrayJet(c)


@lru_cache(maxsize=None)
def _float_table():
    out = []
    for a, b, mid, half, anti, base in _sigma_integral_table(LOCAL_BITS):
        out.append((float(b), float(mid), float(half), np.array([float(v) for v in anti]), float(base)))
    return out


def sigma_integral_array(u):
    u = np.asarray(u, dtype=float)
    flip = u > 0.5
    v = np.where(flip, 1 - u, u)
    out = np.zeros_like(v)
    tiny = (v > 0) & (v < float(_TINY))
    vt = np.where(tiny, v, 0.5)
    out = np.where(tiny, vt * vt * np.exp(-1 / vt) * (1 - 2 * vt + 6 * vt * vt), out)
    lo = float(_TINY)
    for b, mid, half, anti, base in _float_table():
        m = (v >= lo) & (v <= b)
        if m.any():
            out = np.where(m, base + np.polyval(anti, (v - mid) / half), out)
        lo = b
    out = np.where(flip, u - 0.5 + out, out)
    out = np.where(u >= 1, u - 0.5, np.where(u <= 0, 0.0, out))
    return out


def step_jet_array(t, order: int) -> ArrayJet:
    t = np.asarray(t, dtype=float)
    first = t <= 0.5
    inner = ArrayJet.variable(t, order) * 2
    u = np.where(first, 2 * t, 2 * t - 1)
    s = compose(sigma_jet_array(u, order), inner - np.where(first, 0.0, 1.0))
    c = [0.5 * v for v in s.c]
    c[0] = c[0] + np.where(first, 0.0, 0.5)
    return ArrayJet(c)


def step_integral_array(t):
    t = np.asarray(t, dtype=float)
    first = t <= 0.5
    lo = sigma_integral_array(np.where(first, 2 * t, 0.0)) / 4
    hi = 0.125 + (t - 0.5) / 2 + sigma_integral_array(np.where(first, 0.0, 2 * t - 1)) / 4
    out = np.where(first, lo, hi)
    return np.where(t <= 0, 0.0, np.where(t >= 1, t - 0.5, out))


def step_array(t):
    return step_jet_array(t, 0).c[0]


def step_integral_jet_array(t, order: int) -> ArrayJet:
    s = step_jet_array(t, max(order - 1, 0))
    return ArrayJet([step_integral_array(t)] + [s.c[k - 1] / k for k in range(1, order + 1)])
