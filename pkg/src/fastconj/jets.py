"""Truncated Taylor arithmetic ("jets") over mpmath floats.

A jet of order K at a point x stores the Taylor coefficients c[0..K] of a
function, so that f(x + h) = sum(c[i] * h**i) + O(h**(K+1)).  The k-th
derivative is k! * c[k].  Composition and series reversion give exact
chain-rule derivatives of evaluation chains without finite differences.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from mpmath import mp, mpf

from .numeric import to_mpf


class Jet:
    __slots__ = ("c",)

    _fsum = staticmethod(mp.fsum)
    _exp = staticmethod(mp.exp)

    def __init__(self, coeffs: Sequence):
        self.c = [self._coerce(v) for v in coeffs]

    @staticmethod
    def _coerce(v):
        return to_mpf(v)

    @property
    def order(self) -> int:
        return len(self.c) - 1

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        return cls([value] + [0] * order)

    @classmethod
    def variable(cls, x, order: int) -> "Jet":
        """The identity function expanded at x."""
        if order == 0:
            return cls([x])
        return cls([x, 1] + [0] * (order - 1))

    @property
    def value(self):
        return self.c[0]

    def derivative(self, k: int):
        return self.c[k] * math.factorial(k)

    def derivatives(self) -> list:
        return [self.c[k] * math.factorial(k) for k in range(len(self.c))]

    def truncate(self, order: int) -> "Jet":
        return type(self)(self.c[: order + 1])

    def __add__(self, other):
        if isinstance(other, type(self)):
            return type(self)([a + b for a, b in zip(self.c, other.c)])
        return type(self)([self.c[0] + other] + self.c[1:])

    __radd__ = __add__

    def __neg__(self):
        return type(self)([-a for a in self.c])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, type(self)):
            K = min(self.order, other.order)
            a, b = self.c, other.c
            return type(self)([self._fsum(a[i] * b[k - i] for i in range(k + 1)) for k in range(K + 1)])
        return type(self)([a * other for a in self.c])

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        a = self.c
        b = [1 / a[0]]
        for k in range(1, len(a)):
            b.append(-self._fsum(a[j] * b[k - j] for j in range(1, k + 1)) / a[0])
        return type(self)(b)

    def __truediv__(self, other):
        if isinstance(other, type(self)):
            return self * other.reciprocal()
        return type(self)([a / other for a in self.c])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def exp(self) -> "Jet":
        a = self.c
        b = [self._exp(a[0])]
        for k in range(1, len(a)):
            b.append(self._fsum(j * a[j] * b[k - j] for j in range(1, k + 1)) / k)
        return type(self)(b)

    def differentiate(self) -> "Jet":
        """Jet of f' at the same point, one order lower."""
        return type(self)([self.c[k] * k for k in range(1, len(self.c))])

    def __repr__(self):
        return f"Jet({[mp.nstr(v, 8) for v in self.c]})"


def compose(outer: Jet, inner: Jet) -> Jet:
    """Jet of outer∘inner, where outer is expanded at inner.value."""
    K = min(outer.order, inner.order)
    cls = type(inner)
    shift = cls([0] + inner.c[1 : K + 1])
    result = cls.constant(outer.c[K], K)
    for i in range(K - 1, -1, -1):
        result = result * shift + outer.c[i]
    return result


def revert(j: Jet) -> Jet:
    """Jet of the local inverse g with g(j.value) = x, given f's jet at x.

    Returned jet is expanded at y = f(x); its value slot holds 0 and must be
    replaced by the caller with x (the preimage), see `inverse_jet`.
    """
    K = j.order
    cls = type(j)
    if K == 0:
        return cls([0])
    c1 = j.c[1]
    poly = cls([0] + j.c[1:])
    k = cls.variable(0, K)
    g = k / c1
    for _ in range(K):
        g = g - (compose(poly, g) - k) / c1
    return g


def inverse_jet(j: Jet, preimage) -> Jet:
    g = revert(j)
    g.c[0] = g._coerce(preimage)
    return g


class ArrayJet(Jet):
    """Jet whose coefficients are float64 arrays: many points at once."""

    __slots__ = ()
    __array_ufunc__ = None  # make ndarray * jet defer to the jet
    _fsum = staticmethod(sum)
    _exp = staticmethod(np.exp)

    @staticmethod
    def _coerce(v):
        return np.asarray(v, dtype=float)

    def __repr__(self):
        return f"ArrayJet(order={self.order}, n={np.size(self.c[0])})"
