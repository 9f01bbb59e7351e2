import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from fastconj import ergodic as E
from fastconj.circlemaps import Composite, rotation
from fastconj.construction import ConstructionConfig, run
from fastconj.diophantine import oracle_from_spec
from fastconj.generators import TypeTag, make_stage_III_lambda
from fastconj.numeric import to_mpf


@pytest.fixture(scope="module")
def toy():
    """Two stages with small overridden denominators so everything enumerates."""
    cfg = ConstructionConfig(deltas=[F(1, 64), F(1, 256), F(1, 1024)],
                             alpha_overrides={1: F(1, 5), 2: F(2, 11), 3: F(3, 13)}, stop_on_failure=False)
    return run(TypeTag("III_lambda", (F(4),)), 1, 2, oracle_from_spec({"kind": "tower_series"}), cfg, verify=False)


def test_level_sets_nest(toy):
    l1, l2 = E.build_level_sets(toy, 1), E.build_level_sets(toy, 2)
    assert l2.refines(l1) and not l1.refines(l2)
    y1 = E.build_level_sets(toy, 1, "Y")
    assert l1.refines(y1)


def test_class_counts(toy):
    Q1 = toy.stages[0].Q_n
    c1 = E.class_counts(toy, 1, "X")
    assert c1 == {("+",): Q1, ("-",): Q1}
    c2 = E.class_counts(toy, 2, "X")
    assert sum(c2.values()) == len(E.build_level_sets(toy, 2).components)
    assert all(c2[(a, "+")] == c2[(a, "-")] for a in "+-")


def test_classify_agrees_with_enumeration(toy):
    ls = E.build_level_sets(toy, 2)
    rng = random.Random(1)
    for k in rng.sample(range(len(ls.components)), 50):
        lo, hi = ls.components[k]
        assert E.classify(toy, 2, (lo + hi) / 2) == ls.classes[k]


@pytest.mark.parametrize("n", [1, 2])
def test_measure_exact_matches_direct(toy, n):
    m = E.xi_measure(toy, n)
    assert m.match and m.exact == m.direct
    gens = [s.generator for s in toy.stages[:n]]
    expected = F(1)
    for g in gens:
        expected *= g.image_measure(g.I_plus) + g.image_measure(g.I_minus)
    assert m.exact == expected


def test_measure_monte_carlo(toy):
    """Fraction of random xi whose preimage lands in X_2, an oracle independent of the bookkeeping."""
    tower, rng, N = toy.tower(2), random.Random(7), 2000
    hits = 0
    for _ in range(N):
        xi = F(rng.randrange(10**9), 10**9)
        p = tower.inverse_apply(xi)
        x = (p.k + F(float(p.u))) / toy.stages[1].Q_n
        hits += E.classify(toy, 2, x) is not None
    m = float(E.xi_measure(toy, 2).exact)
    sigma = (m * (1 - m) / N) ** 0.5
    assert abs(hits / N - m) < 5 * sigma


def test_cocycle_closure(toy):
    rng = random.Random(3)
    q = toy.alpha(3).denominator
    ls = E.build_level_sets(toy, 2)
    for _ in range(30):
        lo, hi = ls.components[rng.randrange(len(ls.components))]
        x = (lo + hi) / 2
        i, j = rng.randrange(q), rng.randrange(q)
        a = toy.alpha(3)
        y = (x + i * a) % 1
        lhs = E.derivative_cocycle(toy, 2, x, i + j, preimage=True)
        rhs = E.derivative_cocycle(toy, 2, x, i, preimage=True) * E.derivative_cocycle(toy, 2, y, j, preimage=True)
        assert abs(lhs.value - rhs.value) <= mpf(10) ** -20 * abs(lhs.value)


def test_cocycle_matches_finite_difference(toy):
    rng = random.Random(5)
    q = toy.alpha(3).denominator
    ls = E.build_level_sets(toy, 2)
    checked = 0
    for _ in range(100):
        lo, hi = ls.components[rng.randrange(len(ls.components))]
        x, i = (lo + hi) / 2, rng.randrange(q)
        cv = E.derivative_cocycle(toy, 2, x, i, preimage=True)
        if not cv.exact:
            continue
        fd = E.numeric_derivative(toy, 2, x, i)
        assert abs(fd - cv.value) <= mpf(10) ** -15 * abs(cv.value)
        checked += 1
    assert checked >= 50


def test_ratio_membership_exhaustive(toy):
    rep = E.ratio_membership(toy, 1)
    assert rep.exhaustive and rep.checked > 0 and not rep.violations and rep.passed


def test_return_pairs(toy):
    assert E.find_return_pair(toy, 1, 1).i == 0
    rp = E.find_return_pair(toy, 1, 4)
    assert rp.cocycle.exact_value == 4
    with pytest.raises(E.NotFound) as err:
        E.find_return_pair(toy, 1, 3)
    assert "exponent lattice" in err.value.diagnostic


def test_in_lattice():
    assert E.in_lattice(F(8), {"a": F(2)}) == {"a": 3}
    assert E.in_lattice(F(2, 9), {"a": F(2), "b": F(3)}) == {"a": 1, "b": -2}
    assert E.in_lattice(F(5), {"a": F(2)}) is None


def test_component_budget(toy):
    with pytest.raises(E.ComponentExplosion):
        E.build_level_sets(toy, 2, budget=100)


def test_rotation_number_rotation():
    est = E.rotation_number(rotation(F(2, 7)), 50)
    assert est.value == F(2, 7) and est.agrees_with(F(2, 7))


@settings(max_examples=10, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=50))
def test_rotation_number_conjugation_invariant(rho):
    h = make_stage_III_lambda(4, F(1, 64)).map
    f = Composite([h, rotation(rho), h.inverse()])
    assert E.rotation_number(f, 200).agrees_with(rho)


def test_rotation_number_of_f_n(toy):
    assert E.rotation_number(toy.f(1), 300).agrees_with(toy.alpha(2))
