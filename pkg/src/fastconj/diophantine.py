"""Rational approximation of the rotation number with exact certificates.

Irrationals are reached through oracles that answer rational enclosures at
any requested precision.  Liouville witnesses p/q with |alpha - p/q| <
eps * q**-N are certified with `Magnitude` bounds so that gaps such as
10**-(10**9) never have to be expanded.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Optional

from .magnitude import Magnitude, PrecisionExhausted, frac_str, parse_frac

__all__ = [
    "PrecisionExhausted",
    "SearchBudgetExceeded",
    "IrrationalOracle",
    "ExponentSeries",
    "QuadraticIrrational",
    "RationalOracle",
    "LiouvilleWitness",
    "Candidate",
    "convergents",
    "liouville_search",
    "verify_witness",
    "oracle_from_spec",
]

DEFAULT_CAP_DIGITS = 10**6
MAX_ENCLOSURE_BITS = 1 << 22


class SearchBudgetExceeded(RuntimeError):
    """No witness exists below the configured denominator cap."""


@dataclass(frozen=True)
class Candidate:
    """A structured approximant of the oracle with certified gap bounds."""

    approx_fn: Callable[[], Fraction]
    q_digits: float  # log10 of the denominator
    gap_lower: Magnitude
    gap_upper: Magnitude
    label: str = ""

    @property
    def approx(self) -> Fraction:
        return self.approx_fn()


class IrrationalOracle:
    liouville = False
    kind = "abstract"

    def enclosure(self, bits: int) -> tuple[Fraction, Fraction]:
        """Rationals lo <= alpha <= hi with hi - lo <= 2**-bits."""
        raise NotImplementedError

    def candidates(self) -> Iterator[Candidate]:
        return iter(())

    def descriptor(self) -> dict:
        raise NotImplementedError

    def distance_bounds(self, x: Fraction) -> tuple[Magnitude, Magnitude]:
        """Certified (lower, upper) bounds on |alpha - x|."""
        bits = 64
        while bits <= MAX_ENCLOSURE_BITS:
            lo, hi = self.enclosure(bits)
            if lo == hi:
                d = abs(lo - x)
                return Magnitude(d), Magnitude(d)
            if x < lo or x > hi:
                return Magnitude(min(abs(lo - x), abs(hi - x))), Magnitude(max(abs(lo - x), abs(hi - x)))
            bits *= 2
        raise PrecisionExhausted("enclosure cannot separate alpha from the approximant")

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()})"


class ExponentSeries(IrrationalOracle):
    """alpha = sum_{k>=1} base**(-e_k) for a fixed, strictly super-linear exponent rule.

    rule "factorial": e_k = k!  (the classical Liouville constant for base 10)
    rule "tower":     e_k = growth**(k(k-1)/2), ratios e_{k+1}/e_k = growth**k

    Both are Liouville.  With e_{k+1} - e_k >= 1 the tail after term K lies
    strictly between base**-e_{K+1} and 2 * base**-e_{K+1}.
    """

    liouville = True

    def __init__(self, base: int = 10, rule: str = "factorial", growth: int = 8):
        if base < 2:
            raise ValueError("base must be >= 2")
        if rule not in ("factorial", "tower"):
            raise ValueError(f"unknown exponent rule {rule!r}")
        if rule == "tower" and growth < 2:
            raise ValueError("tower growth must be >= 2")
        self.base = base
        self.rule = rule
        self.growth = growth
        self.kind = "factorial_series" if rule == "factorial" else "tower_series"
        self._lock = threading.Lock()

    def exponent(self, k: int) -> int:
        if self.rule == "factorial":
            return math.factorial(k)
        return self.growth ** (k * (k - 1) // 2)

    def truncation(self, k: int) -> Fraction:
        with self._lock:
            return self._truncation(k)

    @lru_cache(maxsize=64)
    def _truncation(self, k: int) -> Fraction:
        ek = self.exponent(k)
        num = sum(self.base ** (ek - self.exponent(j)) for j in range(1, k + 1))
        return Fraction(num, self.base**ek)

    def tail_bounds(self, k: int) -> tuple[Magnitude, Magnitude]:
        e = self.exponent(k + 1)
        return Magnitude.power(self.base, -e), Magnitude.power(self.base, -e, 2)

    def enclosure(self, bits: int):
        k = 1
        while (self.exponent(k + 1)) * math.log2(self.base) < bits + 1:
            k += 1
        lo = self.truncation(k)
        return lo, lo + Fraction(1, 2**bits)

    def candidates(self):
        k = 1
        while True:
            lo, hi = self.tail_bounds(k)
            yield Candidate(
                approx_fn=(lambda kk=k: self.truncation(kk)),
                q_digits=self.exponent(k) * math.log10(self.base),
                gap_lower=lo,
                gap_upper=hi,
                label=f"truncation k={k}",
            )
            k += 1

    def distance_bounds(self, x: Fraction):
        x = Fraction(x)
        for k in range(1, 64):
            if self.exponent(k) * math.log2(self.base) > 4 * MAX_ENCLOSURE_BITS:
                break
            t = self.truncation(k)
            lo_tail, hi_tail = self.tail_bounds(k)
            if t == x:
                return lo_tail, hi_tail
            d = abs(t - x)
            if hi_tail * 4 < Magnitude(d):
                # alpha - x = (t - x) + tail with 0 < tail < hi_tail < |t - x| / 4
                if t > x:
                    return Magnitude(d), Magnitude(d * Fraction(5, 4))
                return Magnitude(d * Fraction(3, 4)), Magnitude(d)
        raise PrecisionExhausted("could not separate alpha from x")

    def descriptor(self):
        d = {"kind": self.kind, "base": self.base}
        if self.rule == "tower":
            d["growth"] = self.growth
        return d


class QuadraticIrrational(IrrationalOracle):
    """alpha = (a + b*sqrt(d)) / c with d a positive non-square."""

    def __init__(self, a: int, b: int, d: int, c: int):
        if math.isqrt(d) ** 2 == d:
            raise ValueError("d must not be a perfect square")
        self.a, self.b, self.d, self.c = a, b, d, c
        self.kind = "quadratic"

    @classmethod
    def golden_fraction(cls) -> "QuadraticIrrational":
        return cls(-1, 1, 5, 2)

    def enclosure(self, bits: int):
        scale = 1 << (bits + 4 + abs(self.b).bit_length())
        r = math.isqrt(self.d * scale * scale)
        lo_s, hi_s = Fraction(r, scale), Fraction(r + 1, scale)
        if self.b < 0:
            lo_s, hi_s = hi_s, lo_s
        ends = sorted([(self.a + self.b * lo_s) / self.c, (self.a + self.b * hi_s) / self.c])
        return ends[0], ends[1]

    def descriptor(self):
        return {"kind": "quadratic", "a": self.a, "b": self.b, "d": self.d, "c": self.c}


class RationalOracle(IrrationalOracle):
    """Guard oracle wrapping an exact rational (not irrational, not Liouville)."""

    kind = "rational"

    def __init__(self, value):
        self.value = Fraction(value)

    def enclosure(self, bits: int):
        return self.value, self.value

    def descriptor(self):
        return {"kind": "rational", "value": frac_str(self.value)}


def oracle_from_spec(spec: dict) -> IrrationalOracle:
    kind = spec.get("kind", "factorial_series")
    if kind == "factorial_series":
        return ExponentSeries(int(spec.get("base", 10)), "factorial")
    if kind == "tower_series":
        return ExponentSeries(int(spec.get("base", 10)), "tower", int(spec.get("growth", 8)))
    if kind == "quadratic":
        return QuadraticIrrational(int(spec["a"]), int(spec["b"]), int(spec["d"]), int(spec["c"]))
    if kind == "rational":
        return RationalOracle(parse_frac(spec["value"]))
    raise ValueError(f"unknown oracle kind {kind!r}")


# --------------------------------------------------------------------------
# continued fractions


def _partial_quotients(x: Fraction, limit: int) -> list[int]:
    out = []
    while len(out) < limit:
        a = math.floor(x)
        out.append(a)
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return out


def _convergents_from_quotients(quots: list[int]) -> list[Fraction]:
    h0, h1 = 1, quots[0]
    k0, k1 = 0, 1
    out = [Fraction(h1, k1)]
    for a in quots[1:]:
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        out.append(Fraction(h1, k1))
    return out


def convergents(alpha: IrrationalOracle, depth: int, max_bits: int = MAX_ENCLOSURE_BITS) -> list[Fraction]:
    """First `depth` convergents of alpha in (0, 1), skipping the trivial 0/1.

    Partial quotients are accepted only when both ends of a rational
    enclosure agree on them; a rational oracle yields its finite expansion.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    bits = 64
    while bits <= max_bits:
        lo, hi = alpha.enclosure(bits)
        if lo == hi:
            quots = _partial_quotients(lo, depth + 1)
            return _drop_zero(_convergents_from_quotients(quots))[:depth]
        ql = _partial_quotients(lo, depth + 3)
        qh = _partial_quotients(hi, depth + 3)
        common = []
        for i, (a, b) in enumerate(zip(ql, qh)):
            if a != b:
                break
            common.append(a)
        # the last agreeing quotient may still be cut by the enclosure edge
        certified = common[:-1]
        conv = _drop_zero(_convergents_from_quotients(certified)) if certified else []
        if len(conv) >= depth:
            return conv[:depth]
        bits *= 2
    raise PrecisionExhausted(f"could not certify {depth} partial quotients within {max_bits} bits")


def _drop_zero(conv: list[Fraction]) -> list[Fraction]:
    if conv and conv[0] == 0:
        return conv[1:]
    return conv


# --------------------------------------------------------------------------
# Liouville witnesses


@dataclass(frozen=True)
class LiouvilleWitness:
    approx: Fraction
    eps: Fraction
    n_exponent: int
    gap_bound: Magnitude
    gap_lower: Optional[Magnitude] = None

    @property
    def p(self) -> int:
        return self.approx.numerator

    @property
    def q(self) -> int:
        return self.approx.denominator

    def threshold(self) -> Magnitude:
        return Magnitude(self.eps) * Magnitude.power(self.q, -self.n_exponent)

    def to_record(self) -> dict:
        return {
            "approx": frac_str(self.approx),
            "eps": frac_str(self.eps),
            "n_exponent": self.n_exponent,
            "gap_bound": self.gap_bound.to_record(),
            "gap_lower": self.gap_lower.to_record() if self.gap_lower is not None else None,
        }

    @classmethod
    def from_record(cls, rec) -> "LiouvilleWitness":
        return cls(
            parse_frac(rec["approx"]),
            parse_frac(rec["eps"]),
            int(rec["n_exponent"]),
            Magnitude.from_record(rec["gap_bound"]),
            Magnitude.from_record(rec["gap_lower"]) if rec.get("gap_lower") else None,
        )


def liouville_search(
    alpha: IrrationalOracle,
    eps,
    n_exponent: int,
    q_min: int = 1,
    cap_digits: int = DEFAULT_CAP_DIGITS,
    accept: Optional[Callable[[LiouvilleWitness], bool]] = None,
    convergent_depth: int = 200,
) -> LiouvilleWitness:
    """Find p/q with q > q_min and a certified |alpha - p/q| < eps * q**-n_exponent.

    Structured approximants of the oracle are tried first, then continued
    fraction convergents.  `accept` may reject a witness (extra constraints);
    the search then moves on to the next candidate.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n_exponent < 1:
        raise ValueError("n_exponent must be >= 1")
    for cand in alpha.candidates():
        if cand.q_digits > cap_digits:
            break
        if cand.q_digits < math.log10(q_min) - 1:
            continue
        approx = cand.approx
        q = approx.denominator
        if q <= q_min:
            continue
        thr = Magnitude(eps) * Magnitude.power(q, -n_exponent)
        if cand.gap_upper < thr:
            w = LiouvilleWitness(approx, eps, n_exponent, cand.gap_upper, cand.gap_lower)
            if accept is None or accept(w):
                return w
    try:
        convs = convergents(alpha, convergent_depth, max_bits=min(MAX_ENCLOSURE_BITS, int(cap_digits * 7)))
    except PrecisionExhausted:
        convs = []
    for c in convs:
        q = c.denominator
        if q <= q_min:
            continue
        if math.log10(q) > cap_digits:
            break
        lo, hi = alpha.distance_bounds(c)
        thr = Magnitude(eps) * Magnitude.power(q, -n_exponent)
        if hi < thr:
            w = LiouvilleWitness(c, eps, n_exponent, hi, lo)
            if accept is None or accept(w):
                return w
    raise SearchBudgetExceeded(
        f"no witness with eps~2^-{eps.denominator.bit_length() - eps.numerator.bit_length()}, N={n_exponent}, "
        f"q>{q_min if q_min < 10**30 else f'2^{q_min.bit_length() - 1}'} with at most {cap_digits} digits"
    )


def verify_witness(w: LiouvilleWitness, alpha: IrrationalOracle) -> bool:
    """True iff a certified enclosure of |alpha - p/q| lies strictly below eps*q**-N."""
    lo, hi = alpha.distance_bounds(w.approx)
    thr = w.threshold()
    if hi < thr:
        return True
    if lo >= thr:
        return False
    raise PrecisionExhausted("enclosure straddles the witness threshold")
