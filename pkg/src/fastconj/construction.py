"""Stage-by-stage fast approximation by conjugation.

Stage n picks a rational rotation alpha_n = p_n/q_n close to alpha, builds
the Q_n-fold lift h_n of the stage generator (Q_n = K(n) q_n, so h_n
commutes with the rotation by alpha_n), and sets H_n = H_{n-1} ∘ h_n,
f_n = H_n ∘ R_{alpha_{n+1}} ∘ H_n^{-1}.  Every scheduling inequality is
checked exactly; norms enter only through inflated, rounded-up estimates
of the generator norms.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional

from mpmath import mp, mpf

from .circlemaps import Composite, CyclicLift, cyclic_lift, rotation
from .diophantine import (DEFAULT_CAP_DIGITS, IrrationalOracle, LiouvilleWitness, SearchBudgetExceeded,
                          liouville_search, verify_witness)
from .generators import BudgetExceeded, StageGenerator, TypeTag, make_stage, schedule_deltas, schedule_product
from .magnitude import Magnitude, PrecisionExhausted, frac_str, int_magnitude
from .norms import BoundLedger, C, abs_norm
from .numeric import bits_for_scale, to_mpf
from .smoothstep import LOCAL_BITS

log = logging.getLogger(__name__)


@dataclass
class ConstructionConfig:
    target_product: Fraction = Fraction(9, 10)
    cap_digits: int = DEFAULT_CAP_DIGITS
    norm_inflation: Fraction = Fraction(101, 100)
    deltas: Optional[list] = None
    alpha_overrides: dict = field(default_factory=dict)
    sample_points: int = 1000
    distance_grid: int = 24
    distance_samples: int = 600
    birkhoff_iterates: int = 10_000
    direct_orbit_limit: int = 100_000
    seed: int = 0
    stop_on_failure: bool = True


@dataclass
class Check:
    name: str
    verdict: bool
    margin: str
    detail: str = ""

    def to_record(self):
        return {"name": self.name, "verdict": self.verdict, "margin": self.margin, "detail": self.detail}


@dataclass
class Constants:
    n: int
    r: int
    order: int  # k = n + r + 1
    C_H: Magnitude  # |H_n|_k <= C_H * q_n^N_H
    N_H: int
    C_dist: Magnitude  # d_{n+r}(f_{n-1}, f_n) <= C_dist * q_n^N_dist * |alpha - alpha_n|
    N_dist: int
    ledger: BoundLedger


@dataclass
class StageRecord:
    n: int
    generator: StageGenerator
    K_n: int
    K_prime_prev: int
    witness: LiouvilleWitness
    constants: Constants
    eps: Fraction
    N: int
    constraints: list
    Q_n: int
    built: bool = True
    checks: list = field(default_factory=list)

    @property
    def alpha_n(self) -> Fraction:
        return self.witness.approx

    @property
    def q_n(self) -> int:
        return self.witness.q

    @property
    def passed(self) -> bool:
        return all(c.verdict for c in self.constraints) and all(c.verdict for c in self.checks)


@dataclass
class ConstructionTrace:
    type_tag: TypeTag
    r: int
    oracle: IrrationalOracle
    config: ConstructionConfig
    stages: list = field(default_factory=list)
    planned: Optional[StageRecord] = None
    failure: Optional[str] = None
    failure_kind: Optional[str] = None  # "budget" | "construction"
    _tower: object = None

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def passed(self) -> bool:
        return self.failure is None and all(s.passed for s in self.stages)

    def alpha(self, n: int) -> Fraction:
        """alpha_n, including the planned stage after the last built one."""
        if 1 <= n <= len(self.stages):
            return self.stages[n - 1].alpha_n
        if self.planned is not None and n == self.planned.n:
            return self.planned.alpha_n
        raise IndexError(n)

    def stage(self, n: int) -> StageRecord:
        if 1 <= n <= len(self.stages):
            return self.stages[n - 1]
        if self.planned is not None and n == self.planned.n:
            return self.planned
        raise IndexError(n)

    def tower(self, n: int | None = None):
        from .tower import Tower
        n = self.depth if n is None else n
        return Tower([s.generator.map for s in self.stages[:n]], [s.Q_n for s in self.stages[:n]])

    def h(self, n: int):
        s = self.stages[n - 1]
        return cyclic_lift(s.generator.map, s.Q_n)

    def H(self, n: int):
        maps = [self.h(i) for i in range(1, n + 1)]
        return maps[0] if len(maps) == 1 else Composite(maps)

    def f(self, n: int):
        """f_n = H_n ∘ R_{alpha_{n+1}} ∘ H_n^{-1} (n = 0 gives the rotation itself)."""
        R = rotation(self.alpha(n + 1))
        if n == 0:
            return R
        H = self.H(n)
        return Composite([H, R, H.inverse()])


# ------------------------------------------------------------- constants

def _rational_up(x: float, inflation: Fraction) -> Fraction:
    """A rational upper bound for an inflated norm estimate."""
    v = Fraction(x) * inflation
    return Fraction(math.ceil(v * 2**20), 2**20)


_NORM_CACHE: dict = {}


def generator_norm(gen: StageGenerator, k: int, inflation: Fraction) -> Fraction:
    """Inflated |ĥ|_k as a rational (the ledger's only empirical input)."""
    key = (gen.type_tag, gen.n, gen.delta, k)
    if key not in _NORM_CACHE:
        _NORM_CACHE[key] = abs_norm(gen.map, k)
    return _rational_up(_NORM_CACHE[key], inflation)


def plan_constants(stages: list, n: int, r: int, gen_n: StageGenerator, K_n: int,
                   inflation: Fraction = Fraction(101, 100)) -> Constants:
    """Explicit C(n,r), N(n,r) for |H_n|_{n+r+1} and for the distance bound.

    Lift bound: |h_i|_k <= |ĥ_i|_k Q_i^(k-1).  Composition bound:
    |fg|_k <= C(k)|f|_k^k |g|_k^k.  The distance bound folds in
    d_{n+r}(H R_a H^-1, H R_b H^-1) <= C(n+r) |H|_k^k |a - b| with
    |alpha_n - alpha_{n+1}| <= 2 |alpha - alpha_n|.
    """
    k = n + r + 1
    ledger = BoundLedger()
    A = None  # bound on |H_{n-1}|_k
    for i, s in enumerate(stages[: n - 1], start=1):
        hn = generator_norm(s.generator, k, inflation)
        ledger.add(f"|hhat_{i}|_{k}", hn, "grid estimate x inflation")
        hi = Magnitude(hn) * int_magnitude(s.Q_n) ** (k - 1)
        ledger.add(f"|h_{i}|_{k}", hi, "lift scaling |hhat|_k Q^(k-1)")
        A = hi if A is None else Magnitude(C(k)) * A**k * hi**k
        ledger.add(f"|H_{i}|_{k}", A, "first factor" if i == 1 else f"composition C({k})")
    hn = generator_norm(gen_n, k, inflation)
    ledger.add(f"|hhat_{n}|_{k}", hn, "grid estimate x inflation")
    own = Magnitude(hn) * int_magnitude(K_n) ** (k - 1)
    if A is None:
        C_H, N_H = own, k - 1
    else:
        C_H, N_H = Magnitude(C(k)) * A**k * own**k, k * (k - 1)
    ledger.add(f"C({n},{r})", C_H, f"|H_{n}|_{k} <= C q_{n}^{N_H}")
    C_dist = Magnitude(C(n + r)) * C_H**k * 2
    N_dist = N_H * k
    ledger.add(f"C_dist({n},{r})", C_dist, f"distance bound, exponent {N_dist}")
    return Constants(n, r, k, C_H, N_H, C_dist, N_dist, ledger)


def alpha_threshold(n: int, r: int, C_nr, N_nr: int) -> tuple[Fraction, int]:
    """eps = 2^(-n-r-1) / C(n,r), rounded down to a power of two when C is huge."""
    C_nr = Magnitude.of(C_nr)
    if C_nr.exact_bits() <= 4096:
        return Fraction(1, 2 ** (n + r + 1)) / C_nr.exact(), N_nr
    hi = C_nr.log2_bracket(200).b
    e = int(mp.ceil(hi)) + 1
    return Fraction(1, 2 ** (n + r + 1 + e)), N_nr


# --------------------------------------------------------------- selection

def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


@dataclass
class SelectionContext:
    n: int
    K_n: int
    delta_n: Fraction
    Q_prev: Optional[int] = None
    delta_prev: Optional[Fraction] = None
    prev_gap_lower: Optional[Magnitude] = None
    lip_prev: Fraction = Fraction(1)
    divisor: int = 1  # q_n must be a multiple of this
    q_min: int = 1


def _check(name, ok, lhs, rhs, detail=""):
    try:
        margin = f"log10 gap {Magnitude.of(rhs).approx_log10() - Magnitude.of(lhs).approx_log10():.6g}"
    except Exception:
        margin = "n/a"
    return Check(name, bool(ok), margin, detail)


def alpha_constraints(w: LiouvilleWitness, ctx: SelectionContext, eps: Fraction, N: int) -> list:
    q = w.q
    Q = ctx.K_n * q
    gap = w.gap_bound
    out = []
    thr5 = Magnitude(eps) * int_magnitude(q) ** (-N)
    out.append(_check("witness gap", gap < thr5, gap, thr5, f"|alpha-alpha_{ctx.n}| < eps q^-{N}"))
    if ctx.Q_prev is not None:
        need = Fraction(2 * ctx.Q_prev) / ctx.delta_prev
        out.append(_check("denominator growth", q > need, Magnitude(need), int_magnitude(q), f"q_{ctx.n} > 2 Q_{ctx.n - 1}/delta_{ctx.n - 1}"))
    thr33 = Magnitude(ctx.delta_n**2) * int_magnitude(Q) ** (-2) * int_magnitude(q) ** (-1)
    out.append(_check("core gap", gap < thr33, gap, thr33, f"|alpha_{ctx.n}-alpha| < delta^2 Q^-2 q^-1"))
    if ctx.prev_gap_lower is not None:
        out.append(_check("gap decrease", gap < ctx.prev_gap_lower, gap, ctx.prev_gap_lower,
                          f"|alpha-alpha_{ctx.n}| < |alpha-alpha_{ctx.n - 1}|"))
    lip = ctx.lip_prev * 2**ctx.n
    out.append(_check("uniform convergence", q > lip, Magnitude(lip), int_magnitude(q), f"q_{ctx.n} > Lip(H_{ctx.n - 1}) 2^{ctx.n}"))
    if ctx.divisor > 1:
        out.append(Check("boundary divisibility", q % ctx.divisor == 0, "exact", f"{ctx.divisor} | q_{ctx.n}"))
    return out


def select_alpha(alpha: IrrationalOracle, eps: Fraction, N: int, ctx: SelectionContext,
                 cap_digits: int = DEFAULT_CAP_DIGITS) -> tuple[LiouvilleWitness, list]:
    """alpha_n satisfying the witness inequality and every extra constraint."""

    def accept(w):
        return all(c.verdict for c in alpha_constraints(w, ctx, eps, N))

    w = liouville_search(alpha, eps, N, q_min=ctx.q_min, cap_digits=cap_digits, accept=accept)
    return w, alpha_constraints(w, ctx, eps, N)


# --------------------------------------------------------------------- run

def _build_stage(trace: ConstructionTrace, n: int, delta: Fraction, built: bool) -> StageRecord:
    cfg, r = trace.config, trace.r
    gen = make_stage(trace.type_tag, n, delta)
    prev = trace.stages[n - 2] if n >= 2 else None
    K_prime_prev = prev.generator.K_prime if prev else 1
    K_n = prev.q_n * K_prime_prev if prev else 1
    consts = plan_constants(trace.stages, n, r, gen, K_n, cfg.norm_inflation)
    eps, N = alpha_threshold(n, r, consts.C_dist, consts.N_dist)
    divisor = 1
    if built and n >= 2:
        L = reduce(_lcm, (s.Q_n * s.generator.K_prime for s in trace.stages[: n - 1]), 1)
        divisor = L // math.gcd(L, K_n)
    lip = Fraction(1)
    for s in trace.stages[: n - 1]:
        lip *= s.generator.s_plus
    ctx = SelectionContext(n, K_n, gen.delta,
                           Q_prev=prev.Q_n if prev else None,
                           delta_prev=prev.generator.delta if prev else None,
                           prev_gap_lower=(prev.witness.gap_lower or prev.witness.gap_bound) if prev else None,
                           lip_prev=lip, divisor=divisor,
                           q_min=prev.q_n if prev else 1)
    if n in cfg.alpha_overrides:
        a = Fraction(cfg.alpha_overrides[n])
        lo, hi = trace.oracle.distance_bounds(a)
        w = LiouvilleWitness(a, eps, N, hi, lo)
        constraints = alpha_constraints(w, ctx, eps, N)
        constraints.insert(0, Check("override", True, "n/a", f"alpha_{n} fixed by configuration"))
    else:
        w, constraints = select_alpha(trace.oracle, eps, N, ctx, cfg.cap_digits)
    log.info("stage %d: q_n ~ 10^%.0f, eps ~ 2^%.0f, N = %d", n, math.log10(w.q) if w.q < 10**300 else w.q.bit_length() * 0.30103,
             -(eps.denominator.bit_length()), N)
    return StageRecord(n, gen, K_n, K_prime_prev, w, consts, eps, N, constraints, K_n * w.q, built)


def run(type_tag: TypeTag, r: int, max_stages: int, alpha_oracle: IrrationalOracle,
        config: ConstructionConfig | None = None, verify: bool = True) -> ConstructionTrace:
    """Build stages 1..max_stages (plus the alpha of stage max_stages+1) and verify them."""
    if max_stages < 1:
        raise ValueError("max_stages must be at least 1")
    if r < 1:
        raise ValueError("r must be positive")
    cfg = config or ConstructionConfig()
    trace = ConstructionTrace(type_tag, r, alpha_oracle, cfg)
    if cfg.deltas:
        deltas = [Fraction(d) for d in cfg.deltas]
        while len(deltas) < max_stages + 1:
            deltas.append(deltas[-1] / 4)
    else:
        deltas = [d for d, _ in schedule_deltas(type_tag, max_stages + 1, cfg.target_product)]
    for n in range(1, max_stages + 2):
        built = n <= max_stages
        try:
            rec = _build_stage(trace, n, deltas[n - 1], built)
        except (SearchBudgetExceeded, BudgetExceeded) as e:
            trace.failure, trace.failure_kind = f"stage {n}: {e}", "budget"
            log.warning("stage %d: %s", n, e)
            break
        except (PrecisionExhausted, ValueError) as e:
            trace.failure, trace.failure_kind = f"stage {n}: {e}", "construction"
            log.warning("stage %d: %s", n, e)
            break
        if built:
            trace.stages.append(rec)
        else:
            trace.planned = rec
        if not all(c.verdict for c in rec.constraints) and cfg.stop_on_failure and n not in cfg.alpha_overrides:
            trace.failure, trace.failure_kind = f"stage {n}: alpha constraints failed", "construction"
            break
    if verify and trace.planned is not None:
        for n in range(1, trace.depth + 1):
            with mp.workprec(working_bits(trace)):
                trace.stages[n - 1].checks = verify_stage(trace, n)
            if not trace.stages[n - 1].passed and cfg.stop_on_failure:
                trace.failure = trace.failure or f"stage {n}: verification failed"
                trace.failure_kind = trace.failure_kind or "construction"
                break
    return trace


def working_bits(trace: ConstructionTrace) -> int:
    qmax = max([s.Q_n for s in trace.stages] + [2])
    return bits_for_scale(qmax)


# ------------------------------------------------------------ verification

def _local_grid(gen: StageGenerator, m: int) -> list:
    """Local coordinates in [0, 1) concentrated on the two join windows."""
    d, a = gen.delta, gen.a
    pts = set()
    for i in range(m + 1):
        t = Fraction(i, m)
        pts.add((-d + 2 * d * t) % 1)
        pts.add(a - d + 2 * d * t)
    for t in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        pts.add(gen.J_plus[0] + (gen.J_plus[1] - gen.J_plus[0]) * t)
        pts.add(gen.J_minus[0] + (gen.J_minus[1] - gen.J_minus[0]) * t)
    return sorted(pts)


def distance_estimate(trace: ConstructionTrace, n: int, grid: int | None = None):
    """Empirical d_{n+r}(f_{n-1}, f_n) by linearisation in alpha.

    f_{n-1} - f_n = H R_{alpha_n} H^-1 - H R_{alpha_{n+1}} H^-1 ~ eta * V with
    eta = alpha_n - alpha_{n+1} and V = H' ∘ R_beta ∘ H^-1 (beta = alpha_{n+1});
    the inverse maps give W = H' ∘ R_-beta ∘ H^-1.  Points are sampled as
    y = H^-1(x) on join-focused local grids at every level, so H^-1 jets come
    from series reversion and no root finding is needed.  The eta^2 term is
    estimated from H'' the same way.  Returns (estimate, remainder, samples).
    """
    from .jets import compose as jet_compose, revert

    cfg = trace.config
    grid = grid or cfg.distance_grid
    R = n + trace.r
    tower = trace.tower(n)
    beta = trace.alpha(n + 1)
    eta = trace.alpha(n) - beta
    grids = [_local_grid(trace.stages[i].generator, grid) for i in range(n)]
    rng = random.Random(cfg.seed + n)
    combos = [[]]
    for g in grids:
        combos = [c + [t] for c in combos for t in g]
    if len(combos) > cfg.distance_samples:
        combos = rng.sample(combos, cfg.distance_samples)
    sup1 = mpf(0)
    sup2 = mpf(0)
    for coords in combos:
        p = tower.from_local(coords, cell=rng.randrange(tower.Qs[0]))
        jy = tower.jet(p, R + 2)
        inv = revert(jy.truncate(R + 1))
        for sign in (1, -1):
            w = tower.shift(p, sign * beta)
            jw = tower.jet(w, R + 2)
            d1 = jw.differentiate()
            d2 = d1.differentiate()
            with mp.workprec(LOCAL_BITS):
                V = jet_compose(d1.truncate(R), inv)
                U = jet_compose(d2.truncate(R), inv)
                for i in range(R + 1):
                    sup1 = max(sup1, abs(V.derivative(i)))
                    sup2 = max(sup2, abs(U.derivative(i)))
    e = abs(to_mpf(eta))
    return e * sup1, e * e * sup2 / 2, len(combos)


def _sample_rationals(rng, count, Q, gen: StageGenerator):
    """Rational test points: random cells, local coordinates in joins and cores."""
    pts = []
    win = [(-gen.delta, gen.delta), (gen.a - gen.delta, gen.a + gen.delta), gen.J_plus, gen.J_minus]
    for i in range(count):
        lo, hi = win[i % 4]
        u = (lo + (hi - lo) * Fraction(rng.randrange(1, 2**20), 2**20)) % 1
        cell = rng.randrange(Q)
        pts.append((cell + u) / Q)
    return pts


def check_commutation(trace, n) -> Check:
    s = trace.stages[n - 1]
    rng = random.Random(trace.config.seed * 7919 + n)
    Q, alpha = s.Q_n, s.alpha_n
    base = s.generator.map
    h = cyclic_lift(base, Q)
    shift_cells = Q * alpha
    exact_hits = 0
    if shift_cells.denominator != 1:
        return Check("a commutation", False, "n/a", "Q_n alpha_n is not an integer")
    for x in _sample_rationals(rng, trace.config.sample_points, Q, s.generator):
        y = x + alpha
        u, u2 = Q * x % 1, Q * y % 1
        if u != u2:
            return Check("a commutation", False, "n/a", f"local coordinates differ at {frac_str(x)}")
        if base.affine_at(u) is not None:
            if h.lift(y) != h.lift(x) + alpha:
                return Check("a commutation", False, "n/a", f"exact mismatch at {frac_str(x)}")
            exact_hits += 1
    return Check("a commutation", True, "0 (exact)",
                 f"{trace.config.sample_points} points, {exact_hits} compared as exact rationals, rest by cell identity")


def check_distance(trace, n) -> tuple[Check, Check]:
    r = trace.r
    thr = Fraction(1, 2 ** (n + r + 1))
    est, rem, count = distance_estimate(trace, n)
    total = est + rem
    ok_b = total < to_mpf(thr)
    b = Check("b empirical distance", bool(ok_b), mp.nstr(to_mpf(thr) - total, 12),
              f"d_{n + r}(f_{n - 1}, f_{n}) ~ {mp.nstr(est, 6)} (+ {mp.nstr(rem, 3)} second order) over {count} samples")
    c = trace.stages[n - 1].constants
    q = trace.stages[n - 1].q_n
    diff = abs(trace.alpha(n) - trace.alpha(n + 1))
    bound = Magnitude(C(n + r)) * (c.C_H * int_magnitude(q) ** c.N_H) ** c.order * _frac_magnitude(diff)
    ok_c = bound < Magnitude(thr)
    cc = Check("c ledger distance bound", bool(ok_c), f"log10 {Magnitude(thr).approx_log10() - bound.approx_log10():.6g}",
               f"bound ~ 10^{bound.approx_log10():.6g} vs 2^-{n + r + 1}")
    return b, cc


def _frac_magnitude(x: Fraction) -> Magnitude:
    x = abs(Fraction(x))
    return int_magnitude(x.numerator) / int_magnitude(x.denominator) if x else Magnitude(0)


def check_boundaries(trace, n) -> Check:
    if n == 1:
        return Check("d boundary points fixed", True, "vacuous", "no earlier stages")
    s = trace.stages[n - 1]
    h = cyclic_lift(s.generator.map, s.Q_n)
    rng = random.Random(trace.config.seed * 31 + n)
    count = 0
    for k in range(1, n):
        sk = trace.stages[k - 1]
        if s.Q_n % (sk.Q_n * sk.generator.K_prime):
            return Check("d boundary points fixed", False, "n/a", f"Q_{k} K'({k}) does not divide Q_{n}")
        cells = sorted({0, sk.Q_n - 1} | {rng.randrange(sk.Q_n) for _ in range(200)})
        for m in cells:
            for b in sk.generator.boundary_points:
                x = (m + b % 1) / sk.Q_n
                if h.lift(x) != x:
                    return Check("d boundary points fixed", False, "n/a", f"h_{n}({frac_str(x)}) != itself")
                count += 1
    return Check("d boundary points fixed", True, "0 (exact)",
                 f"Q_k K'(k) | Q_{n} for all k < {n}; {count} boundary points evaluated exactly")


def check_uniform(trace, n) -> Check:
    from .norms import cr_norm
    s = trace.stages[n - 1]
    lip = Fraction(1)
    for t in trace.stages[: n - 1]:
        lip *= t.generator.s_plus
    bound = to_mpf(lip) / s.q_n
    disp = to_mpf(Fraction(cr_norm(s.generator.map, 0).value)) / s.Q_n  # ||h_n - id||_0
    if n == 1:
        emp = disp
    else:
        tower = trace.tower(n)
        rng = random.Random(trace.config.seed + 17 * n)
        emp = mpf(0)
        gens = [t.generator for t in trace.stages[:n]]
        for _ in range(200):
            coords = [rng.choice(_local_grid(g, 8)) for g in gens]
            p = tower.from_local(coords, cell=rng.randrange(tower.Qs[0]))
            up = tower.up(p, p.u)  # same point at level n-1, h_n not applied
            d1 = tower.jet(up, 1).c[1]
            v = s.generator.map.lift(p.u)
            emp = max(emp, abs(d1) * abs(to_mpf(v) - to_mpf(p.u)) / s.Q_n)
    ok = emp <= bound
    return Check("e uniform convergence", bool(ok), mp.nstr(bound - emp, 6),
                 f"||H_{n}-H_{n - 1}||_0 ~ {mp.nstr(emp, 6)} <= Lip(H_{n - 1})/q_{n} = {mp.nstr(bound, 6)}")


def check_witness(trace, n) -> Check:
    s = trace.stages[n - 1]
    try:
        ok = verify_witness(s.witness, trace.oracle)
    except PrecisionExhausted as e:
        return Check("f witness inequalities", False, "n/a", str(e))
    failed = [c.name for c in s.constraints if not c.verdict]
    return Check("f witness inequalities", ok and not failed, "exact",
                 "witness re-verified" + (f"; failing: {failed}" if failed else "; witness gap, denominator growth, core gap, gap decrease, uniform guard hold"))


def periodic_orbit_residual(trace, n):
    """|f_n^{q_{n+1}}(H_n(0)) - H_n(0)| (mod 1), literal iteration when q_{n+1} is small."""
    a = trace.alpha(n + 1)
    q = a.denominator
    tower = trace.tower(n)
    x0 = tower.apply(tower.point(Fraction(0)))
    if q <= trace.config.direct_orbit_limit:
        f = trace.f(n)
        x = to_mpf(x0.k + x0.u)
        for _ in range(q):
            x = f.lift(x)
        res = x - a.numerator - to_mpf(x0.k + x0.u)
        return abs(res), "iterated"
    # conjugacy-factored power: f^q = H R_{q alpha} H^-1 and q alpha = p
    y0 = tower.inverse_apply(x0.k + x0.u)
    xq = tower.apply(tower.shift(y0, Fraction(a.numerator)))
    # integer parts first: p_{n+1} has far more digits than the working precision
    res = to_mpf(xq.k - a.numerator - x0.k) + (to_mpf(xq.u) - to_mpf(x0.u))
    return abs(res), "factored"


def check_periodic(trace, n) -> Check:
    res, how = periodic_orbit_residual(trace, n)
    ok = res <= mpf("1e-9")
    return Check("g periodic orbit", bool(ok), mp.nstr(res, 6), f"f_{n}^q_{n + 1}(H_{n}(0)) vs H_{n}(0), {how}")


def verify_stage(trace: ConstructionTrace, n: int) -> list:
    if trace.planned is None and n == trace.depth:
        raise ValueError("stage n+1 must be planned to verify stage n")
    checks = [check_commutation(trace, n)]
    checks.extend(check_distance(trace, n))
    checks.append(check_boundaries(trace, n))
    checks.append(check_uniform(trace, n))
    checks.append(check_witness(trace, n))
    checks.append(check_periodic(trace, n))
    return checks
