"""Precision management and exact/float conversions."""

from __future__ import annotations

import os
from contextlib import contextmanager
from fractions import Fraction

import gmpy2
from mpmath import mp, mpf

DEFAULT_BITS = int(os.environ.get("FASTCONJ_PREC_BITS", "256"))
GUARD_BITS = 192

mp.prec = DEFAULT_BITS


def to_mpf(x):
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return mpf(x.numerator)
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def bits_for_scale(q_max: int, base_bits: int = DEFAULT_BITS) -> int:
    """Mantissa needed to resolve cells of width 1/q_max with guard digits."""
    if q_max <= 2**64:
        return base_bits
    return max(base_bits, q_max.bit_length() + GUARD_BITS)


@contextmanager
def precision(bits: int):
    with mp.workprec(bits):
        yield


# Above this size Python's quadratic long division loses badly to GMP.
_BIG_BITS = 20_000


def big_divmod(a: int, b: int) -> tuple[int, int]:
    """Floor divmod, through GMP when the operands are huge."""
    if a.bit_length() < _BIG_BITS and b.bit_length() < _BIG_BITS:
        return divmod(a, b)
    q, r = gmpy2.f_divmod(a, b)
    return int(q), int(r)


def mod_inverse(a: int, m: int) -> int:
    return int(gmpy2.invert(a, m))


def scaled_split(beta: Fraction, Q: int) -> tuple[int, Fraction]:
    """(I, c) with Q * beta = I + c and 0 <= c < 1."""
    beta = Fraction(beta)
    I, r = big_divmod(beta.numerator * Q, beta.denominator)
    return I, Fraction(r, beta.denominator)


def mp_floor(x) -> int:
    if isinstance(x, Fraction):
        return big_divmod(x.numerator, x.denominator)[0]
    return int(mp.floor(x))


def frac_part(x):
    k = mp_floor(x)
    return k, x - k


def circle_centered(v):
    """Representative of v mod 1 in (-1/2, 1/2]."""
    half = Fraction(1, 2) if isinstance(v, Fraction) else mpf(0.5)
    r = v - mp_floor(v + half)
    if r <= -half:
        r += 1
    return r
