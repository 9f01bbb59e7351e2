"""Structured evaluation of H = h_1 ∘ ... ∘ h_n for nested cyclic lifts.

With Q_1 | Q_2 | ... | Q_n, a point at level i is an exact cell index k and
a local coordinate u in [0, 1): x = (k + u) / Q_i.  Applying h_i only
touches u; passing to level i-1 splits k = M k' + j (M = Q_i / Q_{i-1}) and
sets u' = (j + u) / M.  Cell indices stay exact integers, local coordinates
need only LOCAL_BITS, and derivative jets carry the Q_i^(j-1) factors as
mpf exponents.  This is what keeps Q_n ~ 10^500 evaluations cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from mpmath import mp, mpf

from .circlemaps import CircleMap, tag_mul
from .jets import Jet, compose as jet_compose
from .numeric import mp_floor, scaled_split, to_mpf
from .smoothstep import LOCAL_BITS


@dataclass(frozen=True)
class TowerPoint:
    level: int
    k: int
    u: object  # Fraction or mpf in [0, 1)

    def value(self, Q: int):
        if isinstance(self.u, Fraction):
            return (self.k + self.u) / Q
        return (self.k + self.u) / Q


class Tower:
    def __init__(self, bases: Sequence[CircleMap], Qs: Sequence[int]):
        self.bases = list(bases)
        self.Qs = [int(q) for q in Qs]
        self.M = []
        prev = 1
        for q in self.Qs:
            if q % prev:
                raise ValueError(f"cyclic lift orders must divide each other: {prev} does not divide {q}")
            self.M.append(q // prev)
            prev = q
        self._inv = [None] * len(self.bases)

    def base_inverse(self, i: int) -> CircleMap:
        if self._inv[i] is None:
            self._inv[i] = self.bases[i].inverse()
        return self._inv[i]

    @property
    def depth(self) -> int:
        return len(self.Qs)

    # ---- points ----

    def point(self, x, level: int | None = None) -> TowerPoint:
        """Exact split of a rational x at the given level (default: deepest)."""
        level = self.depth if level is None else level
        Q = self.Qs[level - 1] if level else 1
        if isinstance(x, Fraction) or isinstance(x, int):
            k, u = scaled_split(x, Q)
            return TowerPoint(level, k, u)
        y = to_mpf(x) * Q
        k = mp_floor(y)
        return TowerPoint(level, k, y - k)

    def from_local(self, coords: Sequence, cell: int = 0) -> TowerPoint:
        """Point whose local coordinate at level i is about coords[i-1].

        coords[-1] is used exactly as the deepest local coordinate; coarser
        entries fix the integer digits of the cell index.
        """
        k = cell
        for i in range(1, self.depth):
            M = self.M[i]
            k = k * M + min(int(mp_floor(to_mpf(coords[i - 1]) * M)), M - 1)
        return TowerPoint(self.depth, k, coords[-1])

    def shift(self, p: TowerPoint, beta: Fraction) -> TowerPoint:
        """p + beta, with beta rational."""
        Q = self.Qs[p.level - 1] if p.level else 1
        I, c = scaled_split(beta, Q)
        if isinstance(p.u, Fraction):
            s = p.u + c
        else:
            with mp.workprec(max(mp.prec, LOCAL_BITS)):
                s = p.u + to_mpf(c)
        carry = mp_floor(s)
        return TowerPoint(p.level, p.k + I + carry, s - carry)

    def up(self, p: TowerPoint, v) -> TowerPoint:
        """Re-express (p.k + v) / Q_i at level i-1."""
        M = self.M[p.level - 1]
        k, j = divmod(p.k, M)
        if isinstance(v, Fraction):
            u = (j + v) / M
        else:
            u = to_mpf(Fraction(j, M)) + v / M
        carry = mp_floor(u)
        return TowerPoint(p.level - 1, k + carry, u - carry)

    # ---- evaluation ----

    def apply(self, p: TowerPoint, stop: int = 0) -> TowerPoint:
        """h_{stop+1} ∘ ... ∘ h_level applied to p, returned at level `stop`."""
        while p.level > stop:
            v = self.bases[p.level - 1].lift(p.u)
            p = self.up(p, v)
        return p

    def jet(self, p: TowerPoint, order: int, stop: int = 0) -> Jet:
        """Taylor jet (value slot 0) of h_{stop+1} ∘ ... ∘ h_level at p, in x units."""
        j = None
        while p.level > stop:
            Q = mpf(self.Qs[p.level - 1])
            with mp.workprec(LOCAL_BITS):
                b = self.bases[p.level - 1].jet(p.u, order)
                c = [mpf(0)] + [b.c[i] * Q ** (i - 1) for i in range(1, order + 1)]
                hj = Jet(c)
                j = hj if j is None else jet_compose(hj, j)
            v = self.bases[p.level - 1].lift(p.u)
            p = self.up(p, v)
        return j if j is not None else Jet.variable(0, order)

    def slopes(self, p: TowerPoint, stop: int = 0):
        """[(level, slope, tag) or (level, None, None)] along the chain."""
        out = []
        while p.level > stop:
            a = self.bases[p.level - 1].affine_at(p.u)
            out.append((p.level,) + (a if a is not None else (None, None)))
            v = self.bases[p.level - 1].lift(p.u)
            p = self.up(p, v)
        return out, p

    def inverse_apply(self, x, level: int | None = None) -> TowerPoint:
        """(h_1 ∘ ... ∘ h_level)^{-1}(x) for rational x, exact on affine pieces.

        Non-affine steps fall back to mpf at the ambient precision, which must
        resolve 1 / Q_level.
        """
        level = self.depth if level is None else level
        y = Fraction(x) if isinstance(x, (int, Fraction)) else to_mpf(x)
        for i in range(1, level + 1):
            Q = self.Qs[i - 1]
            t = y * Q
            k = mp_floor(t)
            u = t - k
            w = self.base_inverse(i - 1).lift(u)
            y = (k + w) / Q
        return self.point(y, level)
