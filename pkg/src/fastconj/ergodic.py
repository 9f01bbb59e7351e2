"""Finite-stage ergodic checks on a construction trace.

Depth-n objects are built from the Q_j-fold lifts of the generator cores:
X_n is the intersection of the lifted cores I_j^- ∪ I_j^+ for j <= n, and
Y_n the same with the joins removed (J_j^±).  Every core endpoint at level
j-1 is a multiple of 1/Q_j, so each component of X_{j-1} is a union of whole
Q_j-cells and the components of X_j are exactly the cores of those cells.
A component is therefore labelled by its sign sequence, and all components
with the same sequence are translates whose H_n-images have equal length
(H_n is affine on each of them).  Counts, measures and cocycles are exact.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from mpmath import mp, mpf

from .circlemaps import Composite, rotation
from .generators import TypeTag, rational_sqrt
from .magnitude import frac_str
from .numeric import big_divmod, mod_inverse, scaled_split, to_mpf

DEFAULT_BUDGET = 10**6
KINDS = ("X", "Y", "X_plus")


class ComponentExplosion(RuntimeError):
    """More components than the budget allows; restrict to a window."""


class NotFound(LookupError):
    def __init__(self, diagnostic: str):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic


# ------------------------------------------------------------ level sets

def _intervals(gen, kind: str) -> tuple:
    """Signed local intervals of one generator, in increasing order."""
    if kind == "X":
        return (("+", gen.I_plus), ("-", gen.I_minus))
    if kind == "Y":
        return (("+", gen.J_plus), ("-", gen.J_minus))
    if kind == "X_plus":
        return (("+", gen.I_plus),)
    raise ValueError(f"unknown level-set kind {kind!r}")


def _levels(trace, n: int):
    if n < 1 or n > trace.depth:
        raise ValueError(f"trace has {trace.depth} built stages, depth {n} requested")
    return [(s.Q_n, s.generator) for s in trace.stages[:n]]


@dataclass
class LevelSet:
    n: int
    kind: str
    components: list  # [(lo, hi)] exact, increasing
    classes: list  # sign sequence of each component
    window: tuple
    total: int  # number of components on the whole circle

    def __len__(self):
        return len(self.components)

    def locate(self, x) -> Optional[int]:
        x = Fraction(x)
        for i, (lo, hi) in enumerate(self.components):
            if lo <= x <= hi:
                return i
        return None

    def refines(self, coarser: "LevelSet") -> bool:
        """Every component lies inside a component of `coarser`."""
        j = 0
        for lo, hi in self.components:
            while j < len(coarser.components) and coarser.components[j][1] < lo:
                j += 1
            if j == len(coarser.components):
                return False
            clo, chi = coarser.components[j]
            if not (clo <= lo and hi <= chi):
                return False
        return True


def class_counts(trace, n: int, kind: str = "X") -> dict:
    """{sign sequence: number of depth-n components on the circle}, exact."""
    counts = {(): 1}
    length = {(): Fraction(1)}
    for Q, gen in _levels(trace, n):
        new_counts, new_length = {}, {}
        for signs, cnt in counts.items():
            cells = length[signs] * Q
            if cells.denominator != 1:
                raise ValueError(f"components of length {length[signs]} are not unions of 1/{Q}-cells")
            for s, (a, b) in _intervals(gen, kind):
                new_counts[signs + (s,)] = cnt * cells.numerator
                new_length[signs + (s,)] = (b - a) / Q
        counts, length = new_counts, new_length
    return counts


def build_level_sets(trace, n: int, kind: str = "X", window=None, budget: int = DEFAULT_BUDGET) -> LevelSet:
    """Components of X_n (or Y_n, X_n^+) lying inside `window` (default: the circle)."""
    levels = _levels(trace, n)
    w0, w1 = (Fraction(window[0]), Fraction(window[1])) if window else (Fraction(0), Fraction(1))
    total = sum(class_counts(trace, n, kind).values())
    parents = [(w0, w1, ())]
    for Q, gen in levels:
        ivs = _intervals(gen, kind)
        out, pending = [], 0
        for plo, phi, _ in parents:
            pending += (math.ceil(phi * Q) - math.floor(plo * Q) + 2) * len(ivs)
        if pending > budget:
            raise ComponentExplosion(f"depth {len(parents[0][2]) + 1} would visit {pending} candidate components "
                                     f"(budget {budget}); restrict the window")
        for plo, phi, signs in parents:
            for c in range(math.floor(plo * Q) - 1, math.ceil(phi * Q) + 1):
                for s, (a, b) in ivs:
                    lo, hi = (c + a) / Q, (c + b) / Q
                    if plo <= lo and hi <= phi:
                        out.append((lo, hi, signs + (s,)))
        parents = out
    return LevelSet(n, kind, [(lo, hi) for lo, hi, _ in parents], [s for _, _, s in parents], (w0, w1), total)


def classify(trace, n: int, x, kind: str = "X") -> Optional[tuple]:
    """Sign sequence of the depth-n component containing x, or None."""
    x = Fraction(x)
    signs = ()
    for Q, gen in _levels(trace, n):
        u = scaled_split(x, Q)[1]
        for s, (a, b) in _intervals(gen, kind):
            if a <= u <= b:
                signs += (s,)
                break
        else:
            return None
    return signs


def class_component(trace, signs: tuple, kind: str = "X", pick="first", rng=None, cell: int = 0) -> tuple:
    """An explicit component with the given sign sequence inside the cell [cell, cell+1)/Q_1.

    `pick` chooses the sub-cell at every level: "first", "last" or "random".
    """
    levels = _levels(trace, len(signs))
    lo, hi = Fraction(0), Fraction(1)
    for j, ((Q, gen), s) in enumerate(zip(levels, signs)):
        a, b = dict(_intervals(gen, kind))[s]
        if j == 0:
            c = cell
        else:
            first, count = lo * Q, (hi - lo) * Q
            if pick == "first":
                t = 0
            elif pick == "last":
                t = count.numerator - 1
            else:
                t = (rng or random).randrange(count.numerator)
            c = first.numerator + t
        lo, hi = (c + a) / Q, (c + b) / Q
    return lo, hi


def H_exact(trace, n: int, x) -> Fraction:
    """H_n(x) for a rational x whose whole chain stays on affine pieces."""
    tower = trace.tower(n)
    p = tower.apply(tower.point(Fraction(x)))
    v = p.k + p.u
    if not isinstance(v, Fraction):
        raise ValueError(f"H_{n} is not affine along the chain of {frac_str(Fraction(x))}")
    return v


# -------------------------------------------------------------- measures

@dataclass
class MeasureReport:
    n: int
    kind: str
    exact: Fraction  # product formula
    direct: Fraction  # class counts x exact image lengths
    match: bool
    class_measures: dict  # sign sequence -> H_n-image length of one component
    equal_measure: bool  # every sampled component of a class has the same image length
    partial_products: list

    def to_record(self):
        return {"n": self.n, "kind": self.kind, "exact": frac_str(self.exact), "direct": frac_str(self.direct),
                "match": self.match, "equal_measure": self.equal_measure,
                "class_measures": {"".join(k): frac_str(v) for k, v in self.class_measures.items()},
                "partial_products": [frac_str(p) for p in self.partial_products]}


def xi_measure(trace, n: int, kind: str = "X", representatives: int = 3, seed: int = 0) -> MeasureReport:
    """m(H_n(X_n)) two ways: product of per-stage image fractions, and direct image lengths."""
    levels = _levels(trace, n)
    partial, prod = [], Fraction(1)
    for _, gen in levels:
        prod *= sum(gen.image_measure(iv) for _, iv in _intervals(gen, kind))
        partial.append(prod)
    rng = random.Random(seed)
    direct, per_class, equal = Fraction(0), {}, True
    Q1 = levels[0][0]
    for signs, cnt in class_counts(trace, n, kind).items():
        picks = ["first", "last"] + ["random"] * max(representatives - 2, 0)
        lengths = set()
        for pick in picks[:max(representatives, 1)]:
            cell = rng.randrange(Q1) if pick == "random" else 0
            lo, hi = class_component(trace, signs, kind, pick, rng, cell)
            lengths.add(H_exact(trace, n, hi) - H_exact(trace, n, lo))
        equal &= len(lengths) == 1
        per_class[signs] = min(lengths)
        direct += cnt * per_class[signs]
    return MeasureReport(n, kind, prod, direct, prod == direct, per_class, equal, partial)


@dataclass
class SingularityReport:
    rows: list  # (k, m(X_k^+), m(Xi_k^+) direct, m(Xi_k^+) product)
    decreasing: bool
    ratios: list  # m(X_k^+) / m(X_{k-1}^+)
    ratio_bound: Fraction
    ratio_ok: bool
    floor: Fraction
    floor_ok: bool
    match: bool

    @property
    def passed(self) -> bool:
        return self.decreasing and self.ratio_ok and self.floor_ok and self.match

    def to_record(self):
        return {"rows": [[k, frac_str(a), frac_str(b), frac_str(c)] for k, a, b, c in self.rows],
                "decreasing": self.decreasing, "ratios": [frac_str(r) for r in self.ratios],
                "ratio_bound": frac_str(self.ratio_bound), "ratio_ok": self.ratio_ok,
                "floor": frac_str(self.floor), "floor_ok": self.floor_ok, "match": self.match}


def singularity_diagnostic(trace, n: int, ratio_bound=Fraction(1, 4), floor=Fraction(4, 5)) -> SingularityReport:
    """m(X_k^+) shrinks geometrically while m(H_k(X_k^+)) stays large (type II∞ runs)."""
    if trace.type_tag.kind != "II_infty":
        raise ValueError("singularity diagnostic applies to II_infty traces")
    rows, ratios = [], []
    for k in range(1, n + 1):
        Q, gen = _levels(trace, k)[-1]
        cnt = class_counts(trace, k, "X_plus")[("+",) * k]
        mX = cnt * (gen.I_plus[1] - gen.I_plus[0]) / Q
        rep = xi_measure(trace, k, "X_plus")
        rows.append((k, mX, rep.direct, rep.exact))
        if k > 1:
            ratios.append(mX / rows[-2][1])
    decreasing = all(b[1] < a[1] for a, b in zip(rows, rows[1:]))
    return SingularityReport(rows, decreasing, ratios, Fraction(ratio_bound), all(r <= ratio_bound for r in ratios),
                             Fraction(floor), all(r[2] > floor for r in rows), all(r[2] == r[3] for r in rows))


# -------------------------------------------------------------- cocycles

def symbol_values(type_tag: TypeTag) -> dict:
    """Numeric value of each slope symbol used in generator tags."""
    kind, p = type_tag.kind, type_tag.params
    if kind == "III_lambda":
        return {"lam^1/2": rational_sqrt(Fraction(p[0]))}
    if kind == "III_infty":
        return {"lam1": Fraction(p[0]), "lam2": Fraction(p[1])}
    if kind == "III_0":
        return {"3": Fraction(3)}
    if kind == "II_infty":
        return {"2": Fraction(2)}
    raise ValueError(f"unknown type {kind!r}")


@dataclass(frozen=True)
class CocycleValue:
    exponents: tuple  # sorted ((symbol, exp), ...), zero entries dropped
    value: mpf
    exact: bool = True
    exact_value: Optional[Fraction] = None
    per_stage: tuple = ()  # ((level, exponents at that level), ...)
    non_affine: tuple = ()  # levels where a factor fell in a join window

    @classmethod
    def from_exponents(cls, exps: dict, values: dict) -> "CocycleValue":
        exps = tuple(sorted((s, e) for s, e in exps.items() if e))
        v = Fraction(1)
        for s, e in exps:
            v *= values[s] ** e
        return cls(exps, to_mpf(v), True, v)

    @property
    def vector(self) -> dict:
        return dict(self.exponents)

    def exponent(self, symbol: str) -> int:
        return self.vector.get(symbol, 0)

    @property
    def trivial(self) -> bool:
        return not self.exponents

    def __mul__(self, other: "CocycleValue") -> "CocycleValue":
        v = Counter(self.vector)
        v.update(other.vector)
        exact = self.exact and other.exact
        ev = self.exact_value * other.exact_value if exact else None
        return CocycleValue(tuple(sorted((s, e) for s, e in v.items() if e)), self.value * other.value, exact, ev,
                            (), self.non_affine + other.non_affine)

    def inverse(self) -> "CocycleValue":
        return CocycleValue(tuple((s, -e) for s, e in self.exponents), 1 / self.value, self.exact,
                            1 / self.exact_value if self.exact else None,
                            tuple((lv, tuple((s, -e) for s, e in t)) for lv, t in self.per_stage), self.non_affine)

    def to_record(self):
        return {"exponents": [[s, e] for s, e in self.exponents], "value": mp.nstr(self.value, 20),
                "exact": self.exact, "exact_value": frac_str(self.exact_value) if self.exact else None,
                "non_affine": list(self.non_affine)}


def _chain_factors(tower, p) -> list:
    """[(level, slope, tag or None)] for h_level, ..., h_1 along the orbit of p."""
    out = []
    while p.level > 0:
        base = tower.bases[p.level - 1]
        a = base.affine_at(p.u)
        if a is not None:
            out.append((p.level, a[0], a[1]))
        else:
            out.append((p.level, base.jet(p.u, 1).c[1], None))
        p = tower.up(p, base.lift(p.u))
    return out


def derivative_cocycle(trace, n: int, xi, i: int, preimage: bool = False) -> CocycleValue:
    """(f_n^i)'(xi) as a product of stage slopes: y-chain slopes over x-chain slopes.

    With preimage=True, `xi` is x_n = H_n^{-1}(xi) itself (a rational).
    """
    tower = trace.tower(n)
    x = tower.point(Fraction(xi)) if preimage else tower.inverse_apply(xi)
    a = trace.alpha(n + 1)
    y = tower.shift(x, Fraction(big_divmod(i * a.numerator, a.denominator)[1], a.denominator))
    fx, fy = _chain_factors(tower, x), _chain_factors(tower, y)
    exps, per_stage, non_affine = Counter(), [], []
    value, exact = Fraction(1), True
    for (lv, sx, tx), (_, sy, ty) in zip(fx, fy):
        if tx is None or ty is None:
            exact = False
            non_affine.append(lv)
        else:
            d = Counter(dict(ty))
            d.subtract(dict(tx))
            exps.update(d)
            per_stage.append((lv, tuple(sorted((s, e) for s, e in d.items() if e))))
        value = value * sy / sx if exact else to_mpf(value) * to_mpf(sy) / to_mpf(sx)
    exps = tuple(sorted((s, e) for s, e in exps.items() if e))
    if exact:
        return CocycleValue(exps, to_mpf(value), True, value, tuple(per_stage), ())
    return CocycleValue(exps, to_mpf(value), False, None, tuple(per_stage), tuple(non_affine))


def numeric_derivative(trace, n: int, x_n, i: int, guard_bits: int = 64):
    """Central difference of H_n R_{i alpha} H_n^{-1} at H_n(x_n), an oracle independent of the tags.

    The step sits guard_bits below 1/Q_n so it stays inside the affine core
    around x_n, and the precision leaves another guard_bits of headroom.
    """
    Q = trace.stages[n - 1].Q_n
    H = trace.H(n)
    beta = (i * trace.alpha(n + 1)) % 1
    f = Composite([H, rotation(beta), H.inverse()])
    xi = H_exact(trace, n, x_n)
    step_bits = Q.bit_length() + guard_bits
    with mp.workprec(step_bits + 2 * guard_bits + 64):
        h = mpf(2) ** -step_bits
        c = to_mpf(xi)
        return (f.lift(c + h) - f.lift(c - h)) / (2 * h)


# ------------------------------------------------------- ratio membership

def _membership(type_tag: TypeTag, cv: CocycleValue) -> tuple[bool, str]:
    kind = type_tag.kind
    if not cv.exact:
        return False, f"non-affine factor at levels {cv.non_affine}"
    vec = cv.vector
    if kind == "III_lambda":
        extra = set(vec) - {"lam^1/2"}
        if extra or vec.get("lam^1/2", 0) % 2:
            return False, "not in lambda^Z"
        return True, ""
    if kind == "III_infty":
        if set(vec) - {"lam1", "lam2"}:
            return False, "not in lambda1^Z lambda2^Z"
        return True, ""
    if kind == "III_0":
        e = vec.get("3", 0)
        top = max((lv for lv, t in cv.per_stage if t), default=0)
        if e != 0 and abs(e) <= 3 ** (top - 1):
            return False, f"|log3| = {abs(e)} <= 3^{top - 1}"
        return True, ""
    if kind == "II_infty":
        return (cv.trivial, "" if cv.trivial else "nonzero exponent on an X+ return")
    raise ValueError(kind)


@dataclass
class ReturnSample:
    x: Fraction
    i: int
    y: Fraction
    classes: tuple  # (signs of x, signs of y)
    cocycle: CocycleValue
    ok: bool
    reason: str = ""

    def row(self) -> dict:
        return {"x": frac_str(self.x), "i": str(self.i), "class_x": "".join(self.classes[0]),
                "class_y": "".join(self.classes[1]),
                "exponents": ";".join(f"{s}:{e}" for s, e in self.cocycle.exponents),
                "value": mp.nstr(self.cocycle.value, 20), "verdict": "ok" if self.ok else self.reason}


@dataclass
class RatioReport:
    type_tag: TypeTag
    n: int
    exhaustive: bool
    samples: list = field(default_factory=list)

    @property
    def checked(self) -> int:
        return len(self.samples)

    @property
    def violations(self) -> list:
        return [s for s in self.samples if not s.ok]

    @property
    def observed(self) -> Counter:
        return Counter(s.cocycle.exponents for s in self.samples)

    @property
    def observed_values(self) -> set:
        return {s.cocycle.exact_value for s in self.samples if s.cocycle.exact}

    @property
    def both_generators(self) -> bool:
        """III∞: some return carries a nonzero lambda1 exponent and some a nonzero lambda2 exponent."""
        seen = {sym for s in self.samples for sym, _ in s.cocycle.exponents}
        return {"lam1", "lam2"} <= seen

    @property
    def min_nonzero_log3(self) -> Optional[int]:
        vals = [abs(s.cocycle.exponent("3")) for s in self.samples if s.cocycle.exponent("3")]
        return min(vals) if vals else None

    @property
    def passed(self) -> bool:
        return self.checked > 0 and not self.violations

    def to_record(self):
        return {"type": self.type_tag.to_record(), "n": self.n, "exhaustive": self.exhaustive,
                "checked": self.checked, "violations": [v.row() for v in self.violations],
                "observed": [[[[s, e] for s, e in k], c] for k, c in self.observed.items()]}


_INVERSES: dict = {}


def aligned_return(alpha: Fraction, x: Fraction, target: Fraction) -> tuple[int, Fraction]:
    """i in [0, q) with x + i alpha ≡ y (mod 1), y the point of x + Z/q nearest target."""
    p, q = alpha.numerator, alpha.denominator
    j = round((target - x) * q)
    if (p, q) not in _INVERSES:
        _INVERSES.clear()
        _INVERSES[p, q] = mod_inverse(p, q)
    y = x + Fraction(j, q)
    return big_divmod(j * _INVERSES[p, q], q)[1], y - scaled_split(y, 1)[0]


def ratio_membership(trace, n: int, samples: int = 16, type_tag: TypeTag | None = None, seed: int = 0,
                     exhaustive_limit: int = 200_000) -> RatioReport:
    """Check the derivative cocycle on returns of H_n(X_n) to itself.

    When every component in one 1/Q_1 fundamental domain times every i < q_{n+1}
    fits in `exhaustive_limit`, all of them are scanned; otherwise each pair of
    component classes is sampled `samples` times with i from the modular inverse.
    """
    type_tag = type_tag or trace.type_tag
    kind = "X_plus" if type_tag.kind == "II_infty" else "X"
    alpha = trace.alpha(n + 1)
    q = alpha.denominator
    Q1 = trace.stages[0].Q_n
    rng = random.Random(seed)
    report = RatioReport(type_tag, n, False)

    def record(x, i, y, cx, cy):
        cv = derivative_cocycle(trace, n, x, i, preimage=True)
        ok, why = _membership(type_tag, cv)
        report.samples.append(ReturnSample(x, i, y, (cx, cy), cv, ok, why))

    try:
        fd = build_level_sets(trace, n, kind, window=(0, Fraction(1, Q1)), budget=exhaustive_limit)
        small = len(fd) * q <= exhaustive_limit
    except ComponentExplosion:
        small = False
    if small:
        report.exhaustive = True
        for (lo, hi), cx in zip(fd.components, fd.classes):
            x = (lo + hi) / 2
            for i in range(q):
                y = (x + i * alpha) % 1
                cy = classify(trace, n, y, kind)
                if cy is not None:
                    record(x, i, y, cx, cy)
        return report
    classes = list(class_counts(trace, n, kind))
    for cx in classes:
        for cy in classes:
            for _ in range(samples):
                lo, hi = class_component(trace, cx, kind, "random", rng, 0)
                x = (lo + hi) / 2
                tlo, thi = class_component(trace, cy, kind, "random", rng, rng.randrange(Q1))
                i, y = aligned_return(alpha, x, (tlo + thi) / 2)
                got = classify(trace, n, y, kind)
                if got != cy:
                    report.samples.append(ReturnSample(x, i, y, (cx, cy), CocycleValue((), mpf(1), False), False,
                                                       "aligned return missed its target component"))
                    continue
                record(x, i, y, cx, cy)
    return report


# ----------------------------------------------------------- return pairs

def in_lattice(target: Fraction, values: dict, bound: int = 64) -> Optional[dict]:
    """Exponents e with prod(values[s]^e[s]) == target, searched over |e| <= bound."""
    target = Fraction(target)
    syms = sorted(values)

    def single(t, v):
        if t <= 0:
            return None
        e = round(math.log(t) / math.log(v))
        return e if abs(e) <= bound and Fraction(v) ** e == t else None

    if len(syms) == 1:
        e = single(target, values[syms[0]])
        return None if e is None else {syms[0]: e}
    first, rest = syms[0], {s: values[s] for s in syms[1:]}
    for e in range(-bound, bound + 1):
        sub = in_lattice(target / Fraction(values[first]) ** e, rest, bound)
        if sub is not None:
            return {first: e, **sub}
    return None


@dataclass
class ReturnPair:
    xi: Fraction
    i: int
    cocycle: CocycleValue
    x: Fraction
    y: Fraction
    cell: tuple  # fundamental interval of h_n bounded by consecutive fixed points
    classes: tuple
    same_parent: bool  # x and y share their X_{n-1} component


def find_return_pair(trace, n: int, target) -> ReturnPair:
    """A point xi of H_n(X_n) and i with f_n^i(xi) in H_n(X_n) and (f_n^i)'(xi) = target.

    Midpoints of an I_n^- core and an I_n^+ core in one Q_n-cell give the ratio
    s_plus / s_minus; other targets fall back to any pair of component classes.
    """
    target = Fraction(target)
    levels = _levels(trace, n)
    Qn = levels[-1][0]
    alpha = trace.alpha(n + 1)
    classes = list(class_counts(trace, n))
    if target == 1:
        lo, hi = class_component(trace, classes[0])
        x = (lo + hi) / 2
        c = math.floor(x * Qn)
        return ReturnPair(H_exact(trace, n, x), 0, derivative_cocycle(trace, n, x, 0, preimage=True), x, x,
                          (Fraction(c, Qn), Fraction(c + 1, Qn)), (classes[0], classes[0]), True)

    def ratio(cx, cy):
        v = Fraction(1)
        for (_, g), sx, sy in zip(levels, cx, cy):
            v *= (g.s_plus if sy == "+" else g.s_minus) / (g.s_plus if sx == "+" else g.s_minus)
        return v

    pairs = [(cx, cy) for cx in classes for cy in classes if ratio(cx, cy) == target]
    if not pairs:
        if in_lattice(target, symbol_values(trace.type_tag)) is None:
            raise NotFound(f"exponent lattice: {frac_str(target)} is not a product of slope symbols")
        raise NotFound(f"no pair of depth-{n} component classes has derivative ratio {frac_str(target)}")
    pairs.sort(key=lambda p: (p[0][:-1] != p[1][:-1], sum(a != b for a, b in zip(*p))))
    cx, cy = pairs[0]
    same_parent = cx[:-1] == cy[:-1]
    xlo, xhi = class_component(trace, cx)
    x = (xlo + xhi) / 2
    c = math.floor(x * Qn)
    if same_parent:
        a, b = dict(_intervals(levels[-1][1], "X"))[cy[-1]]
        ylo, yhi = (c + a) / Qn, (c + b) / Qn
    else:
        ylo, yhi = class_component(trace, cy, pick="last")
    i, y = aligned_return(alpha, x, (ylo + yhi) / 2)
    if not (ylo <= y <= yhi) or classify(trace, n, y) != cy:
        raise NotFound(f"alignment: no point of x + Z/q_{n + 1} inside the target component")
    cv = derivative_cocycle(trace, n, x, i, preimage=True)
    if cv.exact_value != target:
        raise NotFound(f"cocycle {cv.exact_value} differs from the predicted ratio {frac_str(target)}")
    return ReturnPair(H_exact(trace, n, x), i, cv, x, y, (Fraction(c, Qn), Fraction(c + 1, Qn)), (cx, cy),
                      same_parent)


# -------------------------------------------------------- rotation number

@dataclass
class RotationEstimate:
    value: object  # Fraction when the orbit is exact, else mpf
    error_bar: Fraction
    iterates: int

    def agrees_with(self, rho) -> bool:
        return abs(to_mpf(self.value) - to_mpf(rho)) <= to_mpf(self.error_bar)


def rotation_number(f, iterates: int, tolerance=None, x0=Fraction(0)) -> RotationEstimate:
    """(F^N(x0) - x0) / N for the lift F; off from rho(f) by less than 1/N."""
    if iterates < 1:
        raise ValueError("iterates must be positive")
    N = int(iterates)
    if tolerance is not None:
        N = max(N, math.ceil(1 / Fraction(tolerance)))
    x = x0
    for _ in range(N):
        x = f.lift(x)
    return RotationEstimate((x - x0) / N, Fraction(1, N), N)
