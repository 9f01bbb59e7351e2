from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fastconj.diophantine import (ExponentSeries, LiouvilleWitness, QuadraticIrrational, RationalOracle,
                                  SearchBudgetExceeded, convergents, liouville_search, oracle_from_spec,
                                  verify_witness)
from fastconj.magnitude import Magnitude, PrecisionExhausted, int_magnitude, parse_frac


def test_golden_convergents_are_fibonacci_ratios():
    assert convergents(QuadraticIrrational.golden_fraction(), 4) == [Fraction(1), Fraction(1, 2), Fraction(2, 3),
                                                                       Fraction(3, 5)]


def test_factorial_series_convergents_contain_second_truncation():
    assert Fraction(11, 100) in convergents(ExponentSeries(10), 6)


def test_rational_oracle_gives_terminating_expansion():
    assert convergents(RationalOracle(Fraction(1, 3)), 4) == [Fraction(1, 3)]


def test_witness_11_over_100():
    w = liouville_search(ExponentSeries(10), 1, 2, q_min=10)
    assert w.approx == Fraction(11, 100)
    assert verify_witness(w, ExponentSeries(10))


def test_witness_third_truncation():
    w = liouville_search(ExponentSeries(10), 1, 3, q_min=10**3)
    assert w.approx == Fraction(110001, 10**6)
    assert w.gap_bound < Magnitude.power(10, -18)


def test_n1_accepts_first_convergent():
    w = liouville_search(QuadraticIrrational.golden_fraction(), 1, 1, q_min=1)
    assert w.q > 1
    assert verify_witness(w, QuadraticIrrational.golden_fraction())


def test_overclaimed_witness_is_rejected():
    alpha = ExponentSeries(10)
    lo, hi = alpha.distance_bounds(Fraction(1, 2))
    w = LiouvilleWitness(Fraction(1, 2), Fraction(1, 1000), 5, hi, lo)
    assert verify_witness(w, alpha) is False


def test_exact_rational_witness():
    alpha = RationalOracle(Fraction(2, 7))
    lo, hi = alpha.distance_bounds(Fraction(2, 7))
    assert verify_witness(LiouvilleWitness(Fraction(2, 7), Fraction(1), 3, hi, lo), alpha)


def test_cap_binds():
    with pytest.raises(SearchBudgetExceeded):
        liouville_search(ExponentSeries(10), Fraction(1, 10**6), 6, cap_digits=3)


def test_tower_oracle_denominators():
    alpha = ExponentSeries(10, "tower", 8)
    assert [alpha.truncation(k).denominator for k in (1, 2)] == [10, 10**8]
    assert oracle_from_spec(alpha.descriptor()).descriptor() == alpha.descriptor()


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=2, max_value=5), st.integers(min_value=1, max_value=4))
def test_witness_round_trip(k, n):
    # truncations of the factorial series are witnesses for every N <= k
    alpha = ExponentSeries(10)
    t = alpha.truncation(k)
    lo, hi = alpha.distance_bounds(t)
    N = min(n, k)
    w = LiouvilleWitness(t, Fraction(1), N, hi, lo)
    assert verify_witness(w, alpha)
    assert LiouvilleWitness.from_record(w.to_record()) == w


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=10**6), st.integers(-50, 50))
def test_magnitude_matches_exact(c, e):
    m = Magnitude(c) * Magnitude.power(3, e)
    v = c * Fraction(3) ** e
    assert m.exact() == v
    assert (m < Magnitude(v * Fraction(1001, 1000))) and (m > Magnitude(v * Fraction(999, 1000)))
    assert Magnitude.from_record(m.to_record()) == m


def test_magnitude_huge_comparison():
    big = Magnitude.power(10, -(10**9))
    assert big < Magnitude.power(10, -(10**9) + 1)
    assert big * Magnitude.power(10, 10**9) == Magnitude(Fraction(1))


def test_int_magnitude_detects_powers():
    assert int_magnitude(10**512).powers == ((10, 512),)
    assert int_magnitude(2**100).powers == ((2, 100),)
    assert int_magnitude(12).exact() == 12


def test_parse_frac():
    assert parse_frac("3/4") == Fraction(3, 4)
    assert parse_frac("5") == 5
