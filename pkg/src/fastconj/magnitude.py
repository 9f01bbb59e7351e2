"""Certified comparison of huge positive quantities.

A `Magnitude` is coef * prod(base**exp) with a rational coefficient and
integer powers that may be far too large to expand (gaps like 10**-(10**9)
appear once Liouville witnesses get deep).  Comparisons first bracket log2
of both sides with interval arithmetic and only fall back to exact integer
arithmetic when the brackets overlap and the expansion is affordable.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import iv

EXACT_BIT_LIMIT = 40_000_000


_IV_LOCK = threading.RLock()


class PrecisionExhausted(ArithmeticError):
    """Raised when a certified decision would need more precision than allowed."""


@dataclass(frozen=True)
class Magnitude:
    coef: Fraction
    powers: tuple = field(default=())  # ((base, exp), ...)

    def __post_init__(self):
        if self.coef < 0:
            raise ValueError("Magnitude must be nonnegative")
        merged: dict[int, int] = {}
        for b, e in self.powers:
            if b <= 0:
                raise ValueError("bases must be positive")
            if b == 1 or e == 0:
                continue
            merged[b] = merged.get(b, 0) + e
        object.__setattr__(self, "coef", Fraction(self.coef))
        object.__setattr__(self, "powers", tuple(sorted((b, e) for b, e in merged.items() if e)))

    @classmethod
    def of(cls, value) -> "Magnitude":
        if isinstance(value, Magnitude):
            return value
        return cls(Fraction(value))

    @classmethod
    def power(cls, base: int, exp: int, coef=1) -> "Magnitude":
        return cls(Fraction(coef), ((base, exp),))

    def __mul__(self, other) -> "Magnitude":
        other = Magnitude.of(other)
        return Magnitude(self.coef * other.coef, self.powers + other.powers)

    __rmul__ = __mul__

    def reciprocal(self) -> "Magnitude":
        if self.coef == 0:
            raise ZeroDivisionError
        return Magnitude(1 / self.coef, tuple((b, -e) for b, e in self.powers))

    def __truediv__(self, other) -> "Magnitude":
        return self * Magnitude.of(other).reciprocal()

    def __pow__(self, n: int) -> "Magnitude":
        return Magnitude(self.coef**n, tuple((b, e * n) for b, e in self.powers))

    def is_zero(self) -> bool:
        return self.coef == 0

    def exact_bits(self) -> int:
        bits = self.coef.numerator.bit_length() + self.coef.denominator.bit_length()
        return bits + sum(abs(e) * b.bit_length() for b, e in self.powers)

    def exact(self) -> Fraction:
        if self.exact_bits() > EXACT_BIT_LIMIT:
            raise PrecisionExhausted("magnitude too large to expand exactly")
        v = self.coef
        for b, e in self.powers:
            v *= Fraction(b) ** e
        return v

    def log2_bracket(self, prec: int = 200):
        """Interval enclosing log2 of the value (coef must be > 0)."""
        with _IV_LOCK:
            return self._log2_bracket(prec)

    def _log2_bracket(self, prec: int):
        old = iv.prec
        iv.prec = prec
        try:
            two = iv.log(2)
            lg = (iv.log(iv.mpf(self.coef.numerator)) - iv.log(iv.mpf(self.coef.denominator))) / two
            for b, e in self.powers:
                lg += e * iv.log(iv.mpf(b)) / two
            return lg
        finally:
            iv.prec = old

    def _cmp(self, other) -> int:
        other = Magnitude.of(other)
        if self.coef == 0 or other.coef == 0:
            return (self.coef != 0) - (other.coef != 0)
        for prec in (200, 2000):
            a, b = self.log2_bracket(prec), other.log2_bracket(prec)
            if a.b < b.a:
                return -1
            if a.a > b.b:
                return 1
        ratio = self / other
        if ratio.exact_bits() > EXACT_BIT_LIMIT:
            raise PrecisionExhausted("cannot separate magnitudes")
        r = ratio.exact()
        return (r > 1) - (r < 1)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def approx_log10(self) -> float:
        lg = self.log2_bracket(64)
        return float(lg.mid) * 0.30102999566398120

    def to_record(self) -> dict:
        return {"coef": frac_str(self.coef), "powers": [[b, e] for b, e in self.powers]}

    @classmethod
    def from_record(cls, rec) -> "Magnitude":
        return cls(parse_frac(rec["coef"]), tuple((int(b), int(e)) for b, e in rec["powers"]))

    def __str__(self):
        if not self.powers:
            return frac_str(self.coef)
        return frac_str(self.coef) + "".join(f"*{b}^{e}" for b, e in self.powers)


def int_magnitude(n: int) -> Magnitude:
    """Magnitude of a positive integer, written as a power of 10 or 2 when it is one."""
    n = int(n)
    if n <= 0:
        raise ValueError("positive integer expected")
    for base in (10, 2):
        e = int(round(math.log(n, base))) if n.bit_length() < 1000 else int(round(n.bit_length() / math.log2(base)))
        for cand in (e - 1, e, e + 1):
            if cand > 1 and base**cand == n:
                return Magnitude.power(base, cand)
    return Magnitude(Fraction(n))


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    p, _, q = str(s).partition("/")
    return Fraction(int(p), int(q) if q else 1)
