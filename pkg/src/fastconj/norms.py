"""C^r norms and distances of circle maps, and the a priori bound ledger.

Empirical norms come from per-segment grids: affine stretches contribute
closed-form values, smooth stretches are sampled with Taylor jets on a grid
that doubles until two passes agree, then the best grid point is polished
by golden-section search.  All orders 0..r come out of one sweep.
"""

from __future__ import annotations

import math

import numpy as np
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from mpmath import mp, mpf

from .circlemaps import CircleMap, CyclicLift
from .numeric import to_mpf

START_POINTS = 2**10
MAX_POINTS = 2**13
REL_TOL = 1e-6
POLISH_ROUNDS = 4


class NoConvergence(RuntimeWarning):
    pass


@dataclass
class NormReport:
    order: int
    value: float
    grid_size: int
    refinement_passes: int
    certified: bool
    per_order: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


# ------------------------------------------------------------ constants

@lru_cache(maxsize=None)
def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def C(r: int) -> int:
    """Composition constant (r+1)! 2^(r+1) Bell(r+1)."""
    return math.factorial(r + 1) * 2 ** (r + 1) * bell(r + 1)


# ------------------------------------------------------------- sampling

class _Diff:
    """x -> f(x) - g(x) (g None: the identity), as float64 Taylor arrays."""

    def __init__(self, f, g=None):
        self.f, self.g = f, g

    def coeffs(self, x, order):
        jf = self.f.jet_array(x, order)
        if self.g is None:
            c = list(jf.c)
            c[0] = c[0] - x
            if order >= 1:
                c[1] = c[1] - 1
            return c
        jg = self.g.jet_array(x, order)
        return [p - q for p, q in zip(jf.c, jg.c)]


_FACT = [float(math.factorial(i)) for i in range(32)]


def _order_values(coeffs, order):
    """Per-order arrays to maximize: [d, |d'|, ..., |d^(order)|, -d] for the displacement d.

    Order 0 keeps the sign so that the range of d is known; _report picks the
    integer translate of the lift that minimizes the sup.
    """
    c0 = coeffs[0]
    vals = [c0]
    for i in range(1, order + 1):
        vals.append(np.abs(coeffs[i]) * _FACT[i])
    vals.append(-c0)
    return vals


def _sample_segment(diff, lo, hi, order, n_points):
    xs = np.linspace(float(lo), float(hi), n_points + 1)
    vals = _order_values(diff.coeffs(xs, order), order)
    best = [float(v.max()) for v in vals]
    arg = [float(xs[int(v.argmax())]) for v in vals]
    return best, arg, (float(hi) - float(lo)) / n_points


def _polished(diff, lo, hi, order, n):
    best, arg, h = _sample_segment(diff, lo, hi, order, n)
    return [max(best[i], _polish(diff, order, i, arg[i], lo, hi, h)) for i in range(order + 2)]


def _polish(diff, order, i, x0, lo, hi, h):
    """Zoom in on a grid maximum with successively finer local grids."""
    best = -math.inf
    for _ in range(POLISH_ROUNDS):
        a, b = max(float(lo), x0 - h), min(float(hi), x0 + h)
        xs = np.linspace(a, b, 65)
        v = _order_values(diff.coeffs(xs, order), order)[i]
        k = int(v.argmax())
        best, x0, h = max(best, float(v[k])), float(xs[k]), (b - a) / 32
    return best


def _affine_segment(f, g, lo, hi, slope_f, slope_g, order):
    """Closed-form sup over a stretch where f and g (or identity) are affine."""
    def d0(x):
        v = f.lift(x) - (x if g is None else g.lift(x))
        return v

    v_lo, v_hi = to_mpf(d0(lo)), to_mpf(d0(hi))
    slope_diff = slope_f - (1 if g is None else slope_g)
    vals = [float(max(v_lo, v_hi)), abs(float(slope_diff))]
    vals += [0.0] * (order - 1)
    return vals[: order + 1] + [float(-min(v_lo, v_hi))]


def _joint_segments(f, g):
    pf, sf = f.segments()
    if g is None:
        return pf, [(lo, hi, s, Fraction(1)) for lo, hi, s in sf]
    pg, sg = g.segments()
    period = pf if pf == pg else Fraction(1)

    def tile(p, segs):
        reps = int(period / p)
        if reps > 4096:
            return [(Fraction(0), period, None)]
        out = []
        for k in range(reps):
            out.extend((lo + k * p, hi + k * p, s) for lo, hi, s in segs)
        return out

    sf, sg = tile(pf, sf), tile(pg, sg)
    if any(not isinstance(c, (int, Fraction)) for lo, hi, _ in sf + sg for c in (lo, hi)):
        # mixed exact and mpf breakpoints: compare everything as mpf
        sf = [(to_mpf(lo), to_mpf(hi), s) for lo, hi, s in sf]
        sg = [(to_mpf(lo), to_mpf(hi), s) for lo, hi, s in sg]
    cuts = sorted({c for lo, hi, _ in sf + sg for c in (lo, hi)})
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        mid = (lo + hi) / 2

        def slope_at(segs, x):
            for a, b, s in segs:
                if a <= x < b or a <= x + period < b or a <= x - period < b:
                    return s
            return None

        out.append((lo, hi, slope_at(sf, mid), slope_at(sg, mid)))
    return period, out


def _sups(f, g, order, rel_tol=REL_TOL):
    """Per-order sup estimates of f - g (g None: identity) over one period."""
    key = (id(g), order)
    cache = f.__dict__.setdefault("_sup_cache", {})
    if key in cache and cache[key][0] is g:
        return cache[key][1]
    _, segs = _joint_segments(f, g)
    diff = _Diff(f, g)
    total = [-math.inf] + [0.0] * order + [-math.inf]
    grid, passes, certified = 0, 0, True
    for lo, hi, s_f, s_g in segs:
        if s_f is not None and s_g is not None and _exactish(lo, hi):
            vals = _affine_segment(f, g, Fraction(lo), Fraction(hi), s_f, s_g, order)
        else:
            n = START_POINTS
            prev = _polished(diff, lo, hi, order, n)
            p, ok = 1, False
            while n < MAX_POINTS:
                n *= 2
                cur = _polished(diff, lo, hi, order, n)
                p += 1
                if all(abs(c - q) <= rel_tol * max(abs(c), 1e-300) for c, q in zip(cur, prev)):
                    ok = True
                    break
                prev = cur
            certified = certified and ok
            vals = [max(c, q) for c, q in zip(cur, prev)] if ok else cur
            grid = max(grid, n)
            passes = max(passes, p)
        total = [max(t, v) for t, v in zip(total, vals)]
    result = (total, grid, passes, certified)
    cache[key] = (g, result)
    return result


def _exactish(lo, hi):
    return isinstance(lo, (Fraction, int)) and isinstance(hi, (Fraction, int))


def _report(sups, r) -> NormReport:
    total, grid, passes, certified = sups
    top, bottom = total[0], -total[-1]
    k = math.floor((top + bottom) / 2 + 0.5)  # integer translate of the lift closest to the identity
    per_order = [max(top - k, k - bottom)] + list(total[1: r + 1])
    return NormReport(r, max(per_order), grid, passes, certified, per_order)


def cr_norm(f: CircleMap, r: int, mode: str = "of_difference_from_identity") -> NormReport:
    if r < 0:
        raise ValueError("r must be nonnegative")
    rep = _report(_sups(f, None, r), r)
    if mode == "of_difference_from_identity":
        return rep
    if mode == "of_map_abs":
        inv = _report(_sups(f.inverse() if not hasattr(f, "_inv") else f._inv, None, r), r)
        v = max(rep.value, inv.value, 1.0)
        return NormReport(r, v, max(rep.grid_size, inv.grid_size), max(rep.refinement_passes, inv.refinement_passes),
                          rep.certified and inv.certified, [max(a, b) for a, b in zip(rep.per_order, inv.per_order)])
    raise ValueError(f"unknown mode {mode!r}")


def abs_norm(f: CircleMap, r: int) -> float:
    """|f|_r = max(||f - id||_r, ||f^-1 - id||_r, 1)."""
    return cr_norm(f, r, "of_map_abs").value


def cr_dist(f: CircleMap, g: CircleMap, r: int) -> NormReport:
    a = _report(_sups(f, g, r), r)
    b = _report(_sups(f.inverse(), g.inverse(), r), r)
    return NormReport(r, max(a.value, b.value), max(a.grid_size, b.grid_size),
                      max(a.refinement_passes, b.refinement_passes), a.certified and b.certified,
                      [max(x, y) for x, y in zip(a.per_order, b.per_order)])


# --------------------------------------------------------------- ledger

@dataclass
class LedgerEntry:
    label: str
    value: object
    provenance: str


@dataclass
class BoundLedger:
    entries: list = field(default_factory=list)

    def add(self, label, value, provenance):
        self.entries.append(LedgerEntry(label, value, provenance))
        return value

    def get(self, label):
        for e in reversed(self.entries):
            if e.label == label:
                return e.value
        raise KeyError(label)

    def to_record(self):
        return [{"label": e.label, "value": str(e.value), "provenance": e.provenance} for e in self.entries]


def bound_compose(abs_f, abs_g, r: int, diff_f=None):
    """(C(r)|f|_r^r |g|_r^r, C(r)||f-id||_r |g|_r^r) from norm values."""
    c = C(r)
    full = c * abs_f**r * abs_g**r
    partial = None if diff_f is None else c * diff_f * abs_g**r
    return full, partial


def bound_conjugated_rotations(abs_H_next, r: int, gap):
    """C(r) |H|_{r+1}^{r+1} |alpha - beta|."""
    if gap == 0:
        return 0
    return C(r) * abs_H_next ** (r + 1) * gap
