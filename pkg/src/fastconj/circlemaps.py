"""Degree-one circle maps stored through their lifts.

Three concrete representations cover everything the construction needs:

* PiecewiseMap: exact rational breakpoints on a fundamental domain
  [start, start+1), each piece affine, a smooth join, or a chain of those;
* CyclicLift: x -> (floor(Qx) + base(frac(Qx))) / Q for a base map fixing 0;
* Composite: a lazy composition chain, used when flattening would explode.

Values are exact Fractions whenever the input is a Fraction and every piece
hit is affine; otherwise they are mpf at the ambient precision.  Joins are
evaluated in local coordinates at LOCAL_BITS, which is all the accuracy a
cell of a cyclic lift can use.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from mpmath import mp, mpf

import numpy as np

from .jets import ArrayJet, Jet, compose as jet_compose, inverse_jet
from .magnitude import frac_str, parse_frac
from .numeric import mp_floor, to_mpf
from .smoothstep import (LOCAL_BITS, step, step_array, step_integral, step_integral_array, step_integral_exact,
                         step_integral_jet, step_integral_jet_array)

INVERSION_TOL = mpf(2) ** -(LOCAL_BITS - 16)


class NoFixedPointLift(ValueError):
    pass


class NonAffineSample(ArithmeticError):
    """A point expected to sit in an affine core fell into a join window."""


# -- slope tags: tuples of (symbol, exponent), sorted, zero entries dropped --

def tag_mul(a: tuple, b: tuple) -> tuple:
    acc = dict(a)
    for s, e in b:
        acc[s] = acc.get(s, 0) + e
    return tuple(sorted((s, e) for s, e in acc.items() if e))


def tag_inv(a: tuple) -> tuple:
    return tuple((s, -e) for s, e in a)


def _is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))


def _exact_or_mpf(x):
    return Fraction(x) if isinstance(x, int) else x


# ---------------------------------------------------------------- pieces

class Piece:
    is_affine = False

    def value(self, x):
        raise NotImplementedError

    def jet(self, x, order: int) -> Jet:
        raise NotImplementedError

    def inverse(self) -> "Piece":
        raise NotImplementedError


@dataclass(frozen=True)
class Affine(Piece):
    lo: Fraction
    hi: Fraction
    slope: Fraction
    intercept: Fraction
    tag: tuple = ()
    is_affine = True

    @property
    def v_lo(self):
        return self.slope * self.lo + self.intercept

    @property
    def v_hi(self):
        return self.slope * self.hi + self.intercept

    def value(self, x):
        if _is_exact(x) and _is_exact(self.slope) and _is_exact(self.intercept):
            return self.slope * x + self.intercept
        return to_mpf(self.slope) * to_mpf(x) + to_mpf(self.intercept)

    def jet(self, x, order):
        c = [self.value(to_mpf(x)), to_mpf(self.slope)] + [mpf(0)] * (order - 1)
        return Jet(c[: order + 1])

    def jet_array(self, x, order):
        x = np.asarray(x, dtype=float)
        c = [float(self.slope) * x + float(self.intercept), np.full_like(x, float(self.slope))]
        c += [np.zeros_like(x)] * (order - 1)
        return ArrayJet(c[: order + 1])

    def inverse(self):
        s = 1 / self.slope
        return Affine(self.v_lo, self.v_hi, s, -self.intercept * s, tag_inv(self.tag))

    def to_record(self):
        return {"kind": "affine", "lo": frac_str(self.lo), "hi": frac_str(self.hi),
                "slope": frac_str(self.slope), "intercept": frac_str(self.intercept),
                "tag": [[s, e] for s, e in self.tag]}


@dataclass(frozen=True)
class BumpJoin(Piece):
    """h(x) = v0 + w*(sL*t + (sR-sL)*F(t)), t = (x-lo)/w; h' runs from sL to sR."""

    lo: Fraction
    hi: Fraction
    slope_left: Fraction
    slope_right: Fraction
    v_lo: Fraction

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def v_hi(self):
        return self.v_lo + self.width * (self.slope_left + self.slope_right) / 2

    def _local(self, t):
        sl, d = to_mpf(self.slope_left), to_mpf(self.slope_right - self.slope_left)
        return sl * t + d * step_integral(t)

    def value(self, x):
        if _is_exact(x):
            t = (Fraction(x) - self.lo) / self.width
            f = step_integral_exact(t)
            if f is not None:
                return self.v_lo + self.width * (self.slope_left * t + (self.slope_right - self.slope_left) * f)
        with mp.workprec(LOCAL_BITS):
            t = (to_mpf(x) - to_mpf(self.lo)) / to_mpf(self.width)
            g = self._local(t)
        return to_mpf(self.v_lo) + to_mpf(self.width) * g

    def jet(self, x, order):
        w = to_mpf(self.width)
        with mp.workprec(LOCAL_BITS):
            t = (to_mpf(x) - to_mpf(self.lo)) / w
            F = step_integral_jet(t, order)
            sl, d = to_mpf(self.slope_left), to_mpf(self.slope_right - self.slope_left)
            c = [d * F.c[k] for k in range(order + 1)]
            if order >= 1:
                c[1] += sl
            c = [c[k] / w ** (k - 1) for k in range(order + 1)]
        c[0] = self.value(x)
        return Jet(c)

    def jet_array(self, x, order):
        w = float(self.width)
        t = (np.asarray(x, dtype=float) - float(self.lo)) / w
        F = step_integral_jet_array(t, order)
        sl, d = float(self.slope_left), float(self.slope_right - self.slope_left)
        c = [d * F.c[k] for k in range(order + 1)]
        if order >= 1:
            c[1] = c[1] + sl
        c = [c[k] / w ** (k - 1) for k in range(order + 1)]
        c[0] = float(self.v_lo) + w * (sl * t + d * F.c[0])
        return ArrayJet(c)

    def derivative1(self, x):
        with mp.workprec(LOCAL_BITS):
            t = (to_mpf(x) - to_mpf(self.lo)) / to_mpf(self.width)
            return to_mpf(self.slope_left) + to_mpf(self.slope_right - self.slope_left) * step(t)

    def inverse(self):
        return InverseJoin(self)

    def to_record(self):
        return {"kind": "join", "lo": frac_str(self.lo), "hi": frac_str(self.hi),
                "slope_left": frac_str(self.slope_left), "slope_right": frac_str(self.slope_right),
                "v_lo": frac_str(self.v_lo)}


class InverseJoin(Piece):
    """Monotone numeric inverse of a BumpJoin, bracketed by its exact ends."""

    def __init__(self, fwd: BumpJoin):
        self.fwd = fwd
        self.lo, self.hi = fwd.v_lo, fwd.v_hi
        self.v_lo, self.v_hi = fwd.lo, fwd.hi

    def _solve_t(self, y):
        f = self.fwd
        with mp.workprec(LOCAL_BITS):
            w = to_mpf(f.width)
            z = (to_mpf(y) - to_mpf(f.v_lo)) / w
            sl, d = to_mpf(f.slope_left), to_mpf(f.slope_right - f.slope_left)
            a, b = mpf(0), mpf(1)
            t = z / ((sl + to_mpf(f.slope_right)) / 2)
            t = min(max(t, a), b)
            for _ in range(200):
                g = sl * t + d * step_integral(t) - z
                if g > 0:
                    b = t
                else:
                    a = t
                dg = sl + d * step(t)
                tn = t - g / dg
                if not (a <= tn <= b):
                    tn = (a + b) / 2
                if abs(tn - t) < INVERSION_TOL * mpf(2) ** -8 or b - a < INVERSION_TOL * mpf(2) ** -8:
                    return tn
                t = tn
            return t

    def value(self, y):
        if _is_exact(y):
            if y == self.lo:
                return self.fwd.lo
            if y == self.hi:
                return self.fwd.hi
        t = self._solve_t(y)
        return to_mpf(self.fwd.lo) + to_mpf(self.fwd.width) * t

    def jet(self, y, order):
        x = self.value(y)
        j = self.fwd.jet(x, order)
        j.c[0] = to_mpf(y)
        return inverse_jet(j, x)

    def jet_array(self, y, order):
        f = self.fwd
        y = np.asarray(y, dtype=float)
        w, sl = float(f.width), float(f.slope_left)
        d = float(f.slope_right - f.slope_left)
        z = (y - float(f.v_lo)) / w
        a, b = np.zeros_like(z), np.ones_like(z)
        t = np.clip(z / ((sl + float(f.slope_right)) / 2), 0, 1)
        for _ in range(80):
            g = sl * t + d * step_integral_array(t) - z
            b = np.where(g > 0, t, b)
            a = np.where(g > 0, a, t)
            tn = t - g / (sl + d * step_array(t))
            tn = np.where((tn >= a) & (tn <= b), tn, (a + b) / 2)
            # stop once every point has stalled within a few ulps
            if np.all(np.abs(tn - t) <= np.maximum(1e-17, 4 * np.spacing(np.abs(t)))):
                t = tn
                break
            t = tn
        x = float(f.lo) + w * t
        j = f.jet_array(x, order)
        j.c[0] = y
        return inverse_jet(j, x)

    def inverse(self):
        return self.fwd

    def to_record(self):
        return {"kind": "inverse_join", "of": self.fwd.to_record()}


class Chain(Piece):
    """Composition of pieces and integer/rational shifts, applied left to right."""

    def __init__(self, steps: Sequence, lo, hi):
        self.steps = list(steps)
        self.lo, self.hi = lo, hi
        self.v_lo = self._run_value(lo)
        self.v_hi = self._run_value(hi)

    def _run_value(self, x):
        for s in self.steps:
            x = s.value(x) if isinstance(s, Piece) else x + s
        return x

    def value(self, x):
        return self._run_value(x)

    def jet(self, x, order):
        j = Jet.variable(to_mpf(x), order)
        for s in self.steps:
            if isinstance(s, Piece):
                j = jet_compose(s.jet(j.value, order), j)
            else:
                j = j + to_mpf(s)
        return j

    def jet_array(self, x, order):
        j = ArrayJet.variable(np.asarray(x, dtype=float), order)
        for s in self.steps:
            if isinstance(s, Piece):
                j = jet_compose(s.jet_array(j.value, order), j)
            else:
                j = j + float(s)
        return j

    def inverse(self):
        steps = [s.inverse() if isinstance(s, Piece) else -s for s in reversed(self.steps)]
        return Chain(steps, self.v_lo, self.v_hi)

    def to_record(self):
        return {"kind": "chain", "lo": str(self.lo), "hi": str(self.hi),
                "steps": [s.to_record() if isinstance(s, Piece) else frac_str(Fraction(s)) for s in self.steps]}


def piece_from_record(rec) -> Piece:
    kind = rec["kind"]
    if kind == "affine":
        return Affine(parse_frac(rec["lo"]), parse_frac(rec["hi"]), parse_frac(rec["slope"]),
                      parse_frac(rec["intercept"]), tuple((s, int(e)) for s, e in rec.get("tag", [])))
    if kind == "join":
        return BumpJoin(parse_frac(rec["lo"]), parse_frac(rec["hi"]), parse_frac(rec["slope_left"]),
                        parse_frac(rec["slope_right"]), parse_frac(rec["v_lo"]))
    if kind == "inverse_join":
        return InverseJoin(piece_from_record(rec["of"]))
    raise ValueError(f"unknown piece kind {kind!r}")


# ------------------------------------------------------------------ maps

class CircleMap:
    """Lift of a degree-one circle map: lift(x+1) = lift(x) + 1."""

    def lift(self, x):
        raise NotImplementedError

    def jet(self, x, order: int) -> Jet:
        raise NotImplementedError

    def inverse(self) -> "CircleMap":
        raise NotImplementedError

    def affine_at(self, x):
        """(slope, tag) if x lies inside an affine piece, else None."""
        return None

    def segments(self):
        """(period, [(lo, hi, slope or None), ...]) covering one period.

        A None slope marks a non-affine stretch that must be sampled.
        """
        return Fraction(1), [(Fraction(0), Fraction(1), None)]

    def __call__(self, x):
        return self.lift(x)


class PiecewiseMap(CircleMap):
    def __init__(self, pieces: Sequence[Piece], translation=Fraction(0)):
        self.pieces = list(pieces)
        self.start = self.pieces[0].lo
        self.breakpoints = [p.lo for p in self.pieces] + [self.pieces[-1].hi]
        self.translation = translation
        for span, what in ((self.breakpoints[-1] - self.start, "pieces must cover exactly one fundamental domain"),
                           (self.pieces[-1].v_hi - self.pieces[0].v_lo, "map is not of degree one")):
            if _is_exact(span) and span != 1:
                raise ValueError(what)
            if not _is_exact(span) and abs(span - 1) > mpf(2) ** (16 - min(mp.prec, LOCAL_BITS)):
                raise ValueError(what)
        self._bp_mpf = None
        self._exact_breaks = all(_is_exact(b) for b in self.breakpoints)

    def _locate(self, x):
        if _is_exact(x) and not _is_exact(self.start):
            x = to_mpf(x)
        k = mp_floor(x - self.start)
        y = x - k
        if _is_exact(y) and self._exact_breaks:
            i = bisect_right(self.breakpoints, y) - 1
        else:
            if self._bp_mpf is None or self._bp_mpf[0] != mp.prec:
                self._bp_mpf = (mp.prec, [to_mpf(b) for b in self.breakpoints])
            i = bisect_right(self._bp_mpf[1], to_mpf(y)) - 1
        i = min(max(i, 0), len(self.pieces) - 1)
        return k, y, self.pieces[i]

    def lift(self, x):
        x = _exact_or_mpf(x)
        k, y, p = self._locate(x)
        return p.value(y) + self.translation + k

    def jet(self, x, order):
        k, y, p = self._locate(to_mpf(x))
        j = p.jet(y, order)
        j.c[0] = j.c[0] + to_mpf(self.translation) + k
        return j

    def jet_array(self, x, order):
        x = np.asarray(x, dtype=float)
        start = float(self.start)
        k = np.floor(x - start)
        y = x - k
        bps = np.array([float(b) for b in self.breakpoints])
        idx = np.clip(np.searchsorted(bps, y, side="right") - 1, 0, len(self.pieces) - 1)
        c = [np.zeros_like(x) for _ in range(order + 1)]
        for i, p in enumerate(self.pieces):
            m = idx == i
            if m.any():
                j = p.jet_array(y[m], order)
                for r in range(order + 1):
                    c[r][m] = j.c[r]
        c[0] = c[0] + float(self.translation) + k
        return ArrayJet(c)

    def affine_at(self, x):
        k, y, p = self._locate(_exact_or_mpf(x))
        if p.is_affine and p.lo < y < p.hi:
            return p.slope, p.tag
        return None

    def inverse(self):
        inv = []
        for p in self.pieces:
            q = p.inverse()
            if self.translation:
                q = _shift_domain(q, self.translation)
            inv.append(q)
        return PiecewiseMap(inv)

    def segments(self):
        segs = []
        for p in self.pieces:
            segs.append((p.lo, p.hi, p.slope if p.is_affine else None))
        return Fraction(1), segs

    @property
    def is_affine_everywhere(self):
        return all(p.is_affine for p in self.pieces)

    def to_record(self):
        return {"kind": "piecewise", "translation": frac_str(Fraction(self.translation)),
                "pieces": [p.to_record() for p in self.pieces]}


def _shift_domain(p: Piece, c) -> Piece:
    """Piece q(y) = p(y - c), defined on [lo + c, hi + c]."""
    if p.is_affine:
        return Affine(p.lo + c, p.hi + c, p.slope, p.intercept - p.slope * c, p.tag)
    return Chain([-c, p], p.lo + c, p.hi + c)


class CyclicLift(CircleMap):
    """x -> (floor(Qx) + base(Qx - floor(Qx))) / Q, for a base map fixing 0."""

    def __init__(self, base: CircleMap, Q: int):
        if Q < 1:
            raise ValueError("Q must be a positive integer")
        self.base = base
        self.Q = int(Q)

    def lift(self, x):
        x = _exact_or_mpf(x)
        u = self.Q * x
        k = mp_floor(u)
        v = self.base.lift(u - k)
        if _is_exact(v):
            return (k + v) / self.Q
        return (k + v) / self.Q

    def jet(self, x, order):
        x = to_mpf(x)
        u = self.Q * x
        k = mp_floor(u)
        j = self.base.jet(u - k, order)
        Q = mpf(self.Q)
        c = [(k + j.c[0]) / Q] + [j.c[i] * Q ** (i - 1) for i in range(1, order + 1)]
        return Jet(c)

    def jet_array(self, x, order):
        u = self.Q * np.asarray(x, dtype=float)
        k = np.floor(u)
        j = self.base.jet_array(u - k, order)
        Q = float(self.Q)
        return ArrayJet([(k + j.c[0]) / Q] + [j.c[i] * Q ** (i - 1) for i in range(1, order + 1)])

    def affine_at(self, x):
        x = _exact_or_mpf(x)
        u = self.Q * x
        return self.base.affine_at(u - mp_floor(u))

    def inverse(self):
        return CyclicLift(self.base.inverse(), self.Q)

    def segments(self):
        _, segs = self.base.segments()
        out = []
        for lo, hi, s in segs:
            out.append((Fraction(lo) / self.Q if _is_exact(lo) else lo / self.Q,
                        Fraction(hi) / self.Q if _is_exact(hi) else hi / self.Q, s))
        return Fraction(1, self.Q), out

    def to_record(self):
        return {"kind": "cyclic_lift", "Q": str(self.Q), "base": map_to_record(self.base)}


class Composite(CircleMap):
    """maps[0] ∘ maps[1] ∘ ... ∘ maps[-1], evaluated lazily."""

    def __init__(self, maps: Sequence[CircleMap]):
        flat = []
        for m in maps:
            flat.extend(m.maps if isinstance(m, Composite) else [m])
        self.maps = flat

    def lift(self, x):
        x = _exact_or_mpf(x)
        for m in reversed(self.maps):
            x = m.lift(x)
        return x

    def jet(self, x, order):
        j = Jet.variable(to_mpf(x), order)
        for m in reversed(self.maps):
            j = jet_compose(m.jet(j.value, order), j)
        return j

    def jet_array(self, x, order):
        j = ArrayJet.variable(np.asarray(x, dtype=float), order)
        for m in reversed(self.maps):
            j = jet_compose(m.jet_array(j.value, order), j)
        return j

    def inverse(self):
        return Composite([m.inverse() for m in reversed(self.maps)])

    def affine_at(self, x):
        slope, tag = Fraction(1), ()
        x = _exact_or_mpf(x)
        for m in reversed(self.maps):
            a = m.affine_at(x)
            if a is None:
                return None
            slope, tag = slope * a[0], tag_mul(tag, a[1])
            x = m.lift(x)
        return slope, tag

    def to_record(self):
        return {"kind": "composite", "maps": [map_to_record(m) for m in self.maps]}


def map_to_record(f: CircleMap) -> dict:
    return f.to_record()


def map_from_record(rec) -> CircleMap:
    kind = rec["kind"]
    if kind == "piecewise":
        return PiecewiseMap([piece_from_record(p) for p in rec["pieces"]], parse_frac(rec["translation"]))
    if kind == "cyclic_lift":
        return CyclicLift(map_from_record(rec["base"]), int(rec["Q"]))
    if kind == "composite":
        return Composite([map_from_record(m) for m in rec["maps"]])
    raise ValueError(f"unknown map kind {kind!r}")


# ----------------------------------------------------------- operations

def rotation(angle) -> PiecewiseMap:
    angle = _exact_or_mpf(angle)
    return PiecewiseMap([Affine(Fraction(0), Fraction(1), Fraction(1), Fraction(0))], translation=angle)


def identity() -> PiecewiseMap:
    return rotation(Fraction(0))


def eval_map(f: CircleMap, x):
    """f(x) reduced mod 1."""
    y = f.lift(_exact_or_mpf(x))
    return y - mp_floor(y)


def derivative(f: CircleMap, x, k: int = 1):
    """k-th derivative of the lift; exact on affine pieces."""
    if k < 1:
        raise ValueError("k must be positive")
    a = f.affine_at(_exact_or_mpf(x))
    if a is not None and _is_exact(a[0]):
        return a[0] if k == 1 else Fraction(0)
    return f.jet(x, k).derivative(k)


def invert(f: CircleMap) -> CircleMap:
    return f.inverse()


def cyclic_lift(hhat: CircleMap, Q: int, fix_zero: bool = True) -> CircleMap:
    if fix_zero and hhat.lift(Fraction(0)) != 0:
        raise NoFixedPointLift("base map does not fix 0")
    if Q == 1:
        return hhat
    return CyclicLift(hhat, Q)


def compose(f: CircleMap, g: CircleMap) -> CircleMap:
    """f ∘ g; two piecewise maps are merged piece by piece, others chained."""
    if _is_identity(g):
        return f
    if _is_identity(f):
        return g
    if isinstance(f, PiecewiseMap) and isinstance(g, PiecewiseMap):
        return _merge(f, g)
    return Composite([f, g])


def _is_identity(f) -> bool:
    if not isinstance(f, PiecewiseMap) or f.translation != 0:
        return False
    return all(p.is_affine and p.slope == 1 and p.intercept == 0 for p in f.pieces)


def _as_untranslated(f: PiecewiseMap) -> list[Piece]:
    if not f.translation:
        return f.pieces
    t = f.translation
    out = []
    for p in f.pieces:
        if p.is_affine:
            out.append(Affine(p.lo, p.hi, p.slope, p.intercept + t, p.tag))
        else:
            out.append(Chain([p, t], p.lo, p.hi))
    return out


def _merge(f: PiecewiseMap, g: PiecewiseMap) -> PiecewiseMap:
    fp, gp = _as_untranslated(f), _as_untranslated(g)
    fb = f.breakpoints
    out = []
    for p in gp:
        a, b = p.v_lo, p.v_hi
        # all f-breakpoints (shifted by integers) strictly inside (a, b)
        cuts = []
        k0 = mp_floor(a - f.start) - 1
        k1 = mp_floor(b - f.start) + 1
        for k in range(k0, k1 + 1):
            for c in fb[:-1]:
                y = c + k
                if a < y < b:
                    cuts.append(y)
        cuts.sort()
        ys = [a] + cuts + [b]
        inv = p.inverse()
        xs = [p.lo] + [inv.value(y) for y in cuts] + [p.hi]
        for i in range(len(ys) - 1):
            mid = (ys[i] + ys[i + 1]) / 2
            k = mp_floor(mid - f.start)
            j = bisect_right(fb, mid - k) - 1 if _is_exact(mid) else bisect_right([to_mpf(v) for v in fb], mid - k) - 1
            q = fp[min(max(j, 0), len(fp) - 1)]
            x0, x1 = xs[i], xs[i + 1]
            if p.is_affine and q.is_affine:
                out.append(Affine(x0, x1, q.slope * p.slope,
                                  q.slope * (p.intercept - k) + q.intercept + k, tag_mul(q.tag, p.tag)))
            else:
                out.append(Chain([p, -k, q, k], x0, x1))
    return PiecewiseMap(out)
