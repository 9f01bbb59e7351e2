"""Two-slope base diffeomorphisms and their interval data.

Every generator has the same layout on the fundamental domain [-d, 1-d):

    [-d, d]      smooth join, slope s_minus -> s_plus
    [d, a-d]     affine, slope s_plus   (J_plus)
    [a-d, a+d]   smooth join, slope s_plus -> s_minus
    [a+d, 1-d]   affine, slope s_minus  (J_minus)

where a = (1 - s_minus) / (s_plus - s_minus) makes the map degree one.
The cores I_plus = [2d, a-2d] and I_minus = [a+2d, 1-2d] sit inside J_plus
and J_minus at distance d from their ends.  A constant shift puts the fixed
point at 0; with the symmetric join profile all data stay rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

from .circlemaps import Affine, BumpJoin, PiecewiseMap
from .magnitude import frac_str, parse_frac

MAX_SLOPE_BITS = 1 << 16


class GeometryInfeasible(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class ScheduleInfeasible(ValueError):
    pass


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def rational_sqrt(x: Fraction) -> Fraction | None:
    x = Fraction(x)
    if x <= 0:
        return None
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


@dataclass(frozen=True)
class TypeTag:
    kind: str  # "III_lambda" | "III_infty" | "III_0" | "II_infty"
    params: tuple = ()

    def __str__(self):
        inner = ",".join(frac_str(Fraction(p)) if isinstance(p, Fraction) else str(p) for p in self.params)
        return f"{self.kind}({inner})"

    def to_record(self):
        return {"kind": self.kind, "params": [frac_str(Fraction(p)) for p in self.params]}

    @classmethod
    def from_record(cls, rec):
        return cls(rec["kind"], tuple(parse_frac(p) for p in rec["params"]))


@dataclass
class StageGenerator:
    map: PiecewiseMap
    a: Fraction
    delta: Fraction
    s_plus: Fraction
    s_minus: Fraction
    tag_plus: tuple
    tag_minus: tuple
    type_tag: TypeTag
    n: int = 1
    J_plus: tuple = field(init=False)
    J_minus: tuple = field(init=False)
    I_plus: tuple = field(init=False)
    I_minus: tuple = field(init=False)

    def __post_init__(self):
        a, d = self.a, self.delta
        self.J_plus = (d, a - d)
        self.J_minus = (a + d, 1 - d)
        self.I_plus = (2 * d, a - 2 * d)
        self.I_minus = (a + 2 * d, 1 - 2 * d)

    @property
    def slopes(self) -> tuple:
        return (self.s_plus, self.s_minus)

    @property
    def delta_prime(self) -> Fraction:
        return 1 - self.image_measure(self.I_plus) - self.image_measure(self.I_minus)

    def image_measure(self, iv) -> Fraction:
        lo, hi = iv
        return self.map.lift(hi) - self.map.lift(lo)

    @property
    def boundary_points(self) -> list:
        return [*self.J_minus, *self.J_plus, *self.I_minus, *self.I_plus]

    @property
    def K_prime(self) -> int:
        return reduce(_lcm, (Fraction(b).denominator for b in self.boundary_points), 1)

    def to_record(self):
        return {"type": self.type_tag.to_record(), "n": self.n, "a": frac_str(self.a),
                "delta": frac_str(self.delta), "s_plus": frac_str(self.s_plus),
                "s_minus": frac_str(self.s_minus),
                "tag_plus": [[s, e] for s, e in self.tag_plus],
                "tag_minus": [[s, e] for s, e in self.tag_minus],
                "J_plus": [frac_str(x) for x in self.J_plus], "J_minus": [frac_str(x) for x in self.J_minus],
                "I_plus": [frac_str(x) for x in self.I_plus], "I_minus": [frac_str(x) for x in self.I_minus],
                "delta_prime": frac_str(self.delta_prime), "K_prime": str(self.K_prime)}

    @classmethod
    def from_record(cls, rec) -> "StageGenerator":
        tp = tuple((s, int(e)) for s, e in rec["tag_plus"])
        tm = tuple((s, int(e)) for s, e in rec["tag_minus"])
        g = two_slope_generator(parse_frac(rec["s_plus"]), parse_frac(rec["s_minus"]), parse_frac(rec["delta"]),
                                tp, tm, TypeTag.from_record(rec["type"]), n=int(rec["n"]))
        return g


def two_slope_generator(s_plus, s_minus, delta, tag_plus, tag_minus, type_tag, n=1,
                        breakpoint_denominator: int | None = None) -> StageGenerator:
    s_plus, s_minus, delta = Fraction(s_plus), Fraction(s_minus), Fraction(delta)
    if not (s_plus > 1 > s_minus > 0):
        raise GeometryInfeasible(f"need s_plus > 1 > s_minus > 0, got {s_plus}, {s_minus}")
    if delta <= 0:
        raise GeometryInfeasible("delta must be positive")
    a = (1 - s_minus) / (s_plus - s_minus)
    if a - 4 * delta <= 0 or (1 - a) - 4 * delta <= 0:
        raise GeometryInfeasible(f"delta={delta} too large for crossing point a={a}: join windows overlap the cores")
    d = delta
    # lines through 0 before the shift: s_plus*x on J_plus, s_minus*x (mod 1) on J_minus
    shift = -d * (s_plus - s_minus) / 4
    pieces = [
        BumpJoin(-d, d, s_minus, s_plus, -s_minus * d + shift),
        Affine(d, a - d, s_plus, shift, tag_plus),
        BumpJoin(a - d, a + d, s_plus, s_minus, s_plus * (a - d) + shift),
        Affine(a + d, 1 - d, s_minus, s_plus * a - s_minus * a + shift, tag_minus),
    ]
    m = PiecewiseMap(pieces)
    g = StageGenerator(m, a, d, s_plus, s_minus, tuple(tag_plus), tuple(tag_minus), type_tag, n)
    if m.lift(Fraction(0)) != 0:
        raise AssertionError("generator does not fix 0")
    if breakpoint_denominator is not None:
        D = int(breakpoint_denominator)
        bad = [b for b in g.boundary_points if (b * D).denominator != 1]
        if bad:
            raise GeometryInfeasible(f"boundary points {[str(b) for b in bad]} are not multiples of 1/{D}")
    return g


def make_stage_III_lambda(lam, delta, breakpoint_denominator=None, n: int = 1) -> StageGenerator:
    lam = Fraction(lam)
    if lam <= 1:
        raise GeometryInfeasible(f"lambda must exceed 1, got {lam}")
    r = rational_sqrt(lam)
    if r is None:
        raise ValueError(f"lambda={lam} has no rational square root; only exact slopes are supported")
    return two_slope_generator(r, 1 / r, delta, (("lam^1/2", 1),), (("lam^1/2", -1),),
                               TypeTag("III_lambda", (lam,)), n, breakpoint_denominator)


def make_stage_III_infty(n: int, lambda1=Fraction(2), lambda2=Fraction(3), delta=Fraction(1, 100),
                         breakpoint_denominator=None) -> StageGenerator:
    lambda1, lambda2 = Fraction(lambda1), Fraction(lambda2)
    if not (1 < lambda1 < lambda2):
        raise GeometryInfeasible("need 1 < lambda1 < lambda2")
    lam, sym = (lambda1, "lam1") if n % 2 == 1 else (lambda2, "lam2")
    return two_slope_generator(lam, 1 / lam, delta, ((sym, 1),), ((sym, -1),),
                               TypeTag("III_infty", (lambda1, lambda2)), n, breakpoint_denominator)


def _check_budget(bits: int, what: str):
    if bits > MAX_SLOPE_BITS:
        raise BudgetExceeded(f"{what} needs {bits} bits, budget is {MAX_SLOPE_BITS}")


def make_stage_III_0(n: int, delta, breakpoint_denominator=None) -> StageGenerator:
    if n < 1:
        raise ValueError("n must be positive")
    e = 3 ** n
    _check_budget(int(e * 1.585) + 1, f"slope 3^(3^{n})")
    return two_slope_generator(Fraction(3) ** e, Fraction(1, 3), delta, (("3", e),), (("3", -1),),
                               TypeTag("III_0"), n, breakpoint_denominator)


def make_stage_II_infty(n: int, delta, breakpoint_denominator=None, offset: int = 0) -> StageGenerator:
    """Slopes 2^(n+offset) and its inverse; offset=0 is the plain 2^(+-n) family."""
    if n < 1:
        raise ValueError("n must be positive")
    k = n + offset
    _check_budget(k, f"slope 2^{k}")
    return two_slope_generator(Fraction(2) ** k, Fraction(1, 2) ** k, delta, (("2", k),), (("2", -k),),
                               TypeTag("II_infty", (offset,)), n, breakpoint_denominator)


def make_stage(type_tag: TypeTag, n: int, delta) -> StageGenerator:
    kind, p = type_tag.kind, type_tag.params
    if kind == "III_lambda":
        return make_stage_III_lambda(p[0], delta, n=n)
    if kind == "III_infty":
        return make_stage_III_infty(n, p[0], p[1], delta)
    if kind == "III_0":
        return make_stage_III_0(n, delta)
    if kind == "II_infty":
        return make_stage_II_infty(n, delta, offset=int(p[0]) if p else 0)
    raise ValueError(f"unknown type {kind!r}")


def _slopes(type_tag: TypeTag, n: int):
    g = make_stage(type_tag, n, Fraction(1, 10**9) if type_tag.kind != "III_0" else Fraction(1, 3 ** (3 ** n + 3)))
    return g.s_plus, g.s_minus, g.a


def _pow2_floor(x: Fraction) -> Fraction:
    """Largest 2^-j (j >= 0) not exceeding x, for 0 < x <= 1."""
    j = 0
    while Fraction(1, 2**j) > x:
        j += 1
    return Fraction(1, 2**j)


def schedule_deltas(type_tag: TypeTag, max_stages: int, target_product=Fraction(9, 10)) -> list[tuple]:
    """delta_n with delta'_n <= c * 4^-n, so sum over all n (planned or not) stays < 1 - target.

    Returns [(delta_n, K'_n)] for n = 1..max_stages.
    """
    target = Fraction(target_product)
    if target >= 1:
        raise ScheduleInfeasible("target product must be below 1")
    budget = 1 - target if target > 0 else Fraction(1, 2)
    # sum_{n>=1} c*4^-n = c/3; keep half the budget as slack
    c = budget * 3 / 2
    out = []
    for n in range(1, max_stages + 1):
        s_p, s_m, a = _slopes(type_tag, n)
        want = c / 4**n / (4 * (s_p + s_m))
        geom = min(a, 1 - a) / 5
        d = _pow2_floor(min(want, geom))
        g = make_stage(type_tag, n, d)
        out.append((d, g.K_prime))
    return out


def schedule_product(gens) -> Fraction:
    p = Fraction(1)
    for g in gens:
        p *= 1 - g.delta_prime
    return p
