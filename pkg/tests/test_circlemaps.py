import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from fastconj.circlemaps import (INVERSION_TOL, NoFixedPointLift, compose, cyclic_lift, derivative, eval_map,
                                 identity, invert, map_from_record, rotation)
from fastconj.generators import make_stage_III_lambda
from fastconj.numeric import to_mpf
from fastconj.jets import ArrayJet, Jet, compose as jet_compose, inverse_jet
from fastconj.smoothstep import (sigma_integral, step, step_integral, step_integral_array, step_integral_jet,
                                 step_jet, step_jet_array)

fracs = st.fractions(min_value=0, max_value=1, max_denominator=10**6)


@pytest.fixture(scope="module")
def g():
    return make_stage_III_lambda(4, Fraction(1, 100))


def test_identity_and_rotation_examples():
    assert eval_map(identity(), Fraction(1, 3)) == Fraction(1, 3)
    assert eval_map(rotation(Fraction(1, 4)), Fraction(7, 8)) == Fraction(1, 8)


def test_affine_value_exact(g):
    x = Fraction(1, 7)  # inside J_plus = [1/100, 1/3 - 1/100]
    y = g.map.lift(x)
    assert isinstance(y, Fraction)
    assert y == 2 * x + (g.map.lift(Fraction(1, 5)) - 2 * Fraction(1, 5))


def test_derivatives_on_affine_piece(g):
    assert derivative(g.map, Fraction(1, 7)) == 2
    assert derivative(g.map, Fraction(1, 7), 3) == 0


def test_join_midpoint_slope_between_sides(g):
    d = derivative(g.map, g.a)
    assert mpf(0.5) < d < 2


def test_compose_rotations_exact():
    a, b = Fraction(3, 7), Fraction(5, 6)
    f = compose(rotation(a), rotation(b))
    for x in (Fraction(0), Fraction(1, 9), Fraction(2, 3)):
        assert eval_map(f, x) == eval_map(rotation((a + b) % 1), x)


def test_compose_with_identity_keeps_breakpoints(g):
    f = compose(g.map, identity())
    assert f.breakpoints == g.map.breakpoints


def test_self_composition_slope_four(g):
    x = Fraction(3, 200)  # g(x) = 2x + shift stays in the slope-2 region
    gg = compose(g.map, g.map)
    assert derivative(gg, x) == 4


def test_inverse_of_rotation():
    a = Fraction(2, 9)
    f = invert(rotation(a))
    assert eval_map(f, Fraction(1, 3)) == eval_map(rotation(-a), Fraction(1, 3))


def test_inverse_slope_half(g):
    y = g.map.lift(Fraction(1, 7))
    assert derivative(invert(g.map), y) == Fraction(1, 2)


def test_double_inverse_round_trip(g):
    ff = invert(invert(g.map))
    rng = random.Random(1)
    for _ in range(1000):
        x = mpf(rng.random())
        assert abs(ff.lift(x) - g.map.lift(x)) <= 10 * INVERSION_TOL


def test_cyclic_lift_identity_for_q1(g):
    assert cyclic_lift(g.map, 1) is g.map


def test_cyclic_lift_needs_fixed_point():
    with pytest.raises(NoFixedPointLift):
        cyclic_lift(rotation(Fraction(1, 3)), 5)


def test_cyclic_lift_commutes_with_cell_rotation(g):
    Q = 12
    h = cyclic_lift(g.map, Q)
    for x in (Fraction(1, 97), Fraction(5, 31), Fraction(2, 3)):
        assert h.lift(x + Fraction(1, Q)) == h.lift(x) + Fraction(1, Q) or \
            abs(h.lift(x + Fraction(1, Q)) - h.lift(x) - Fraction(1, Q)) < 1e-30


def test_rotation_period():
    p, q = 3, 11
    R = rotation(Fraction(p, q))
    rng = random.Random(2)
    for _ in range(1000):
        x = Fraction(rng.randrange(10**6), 10**6)
        y = x
        for _ in range(q):
            y = R.lift(y)
        assert y == x + p


def test_rotation_derivatives():
    R = rotation(Fraction(1, 5))
    assert derivative(R, Fraction(1, 3)) == 1
    assert derivative(R, Fraction(1, 3), 2) == 0


def test_map_record_round_trip(g):
    f = map_from_record(g.map.to_record())
    for x in (Fraction(1, 7), Fraction(1, 2), Fraction(9, 10)):
        assert f.lift(x) == g.map.lift(x)


@settings(max_examples=200, deadline=None)
@given(fracs)
def test_inverse_round_trip_property(x):
    gm = make_stage_III_lambda(4, Fraction(1, 64)).map
    y = gm.lift(x)
    back = gm.inverse().lift(y)
    assert abs(to_mpf(back) - to_mpf(x)) < 1e-30


@settings(max_examples=100, deadline=None)
@given(fracs, fracs)
def test_lift_is_monotone_degree_one(x, y):
    gm = make_stage_III_lambda(9, Fraction(1, 64)).map
    lo, hi = min(x, y), max(x, y)
    assert to_mpf(gm.lift(lo)) <= to_mpf(gm.lift(hi))
    assert abs(to_mpf(gm.lift(x + 1)) - to_mpf(gm.lift(x)) - 1) < 1e-30


# ---- jets and the join profile ----

def test_jet_compose_matches_chain_rule():
    # d/dx exp(x^2) at x0: outer exp expanded at x0^2, inner x^2 expanded at x0
    x0 = mpf("0.3")
    inner = Jet.variable(x0, 4) * Jet.variable(x0, 4)
    outer = Jet.variable(x0 * x0, 4).exp()
    j = jet_compose(outer, inner)
    f = lambda t: mp.exp(t * t)
    for k in range(1, 5):
        assert abs(j.derivative(k) - mp.diff(f, x0, k)) < 1e-25


def test_inverse_jet_of_exp_is_log():
    a = mpf("0.7")
    j = Jet.variable(a, 5).exp()
    inv = inverse_jet(j, a)  # jet of log at e^a
    y = mp.exp(a)
    expected = [a, 1 / y, -1 / (2 * y**2), 1 / (3 * y**3), -1 / (4 * y**4), 1 / (5 * y**5)]
    for c, e in zip(inv.c, expected):
        assert abs(c - e) < 1e-40


def test_step_profile_exact_nodes():
    assert step(0) == 0 and step(1) == 1 and step(mpf(1) / 2) == mpf(1) / 2
    assert abs(step_integral(mpf(1) / 2) - mpf(1) / 8) < 1e-35
    assert abs(step_integral(1) - mpf(1) / 2) < 1e-35


def test_sigma_integral_by_quadrature():
    for u in ("0.05", "0.3", "0.5", "0.8"):
        u = mpf(u)
        q = mp.quad(lambda v: mp.exp(-1 / v) / (mp.exp(-1 / v) + mp.exp(-1 / (1 - v))), [0, min(u, mpf("0.5")), u])
        assert abs(sigma_integral(u) - q) < 1e-30


def test_step_jet_matches_numeric_derivatives():
    t = mpf("0.37")
    j = step_jet(t, 3)
    for k in (1, 2, 3):
        assert abs(j.derivative(k) - mp.diff(step, t, k)) < 1e-20


def test_integral_jet_first_coefficient_is_step():
    t = mpf("0.61")
    assert abs(step_integral_jet(t, 2).c[1] - step(t)) < 1e-35


def test_float_paths_match_mp():
    ts = np.linspace(0.001, 0.999, 101)
    arr = step_jet_array(ts, 3)
    ints = step_integral_array(ts)
    for i in range(0, 101, 10):
        jm = step_jet(mpf(ts[i]), 3)
        for k in range(4):
            assert abs(float(jm.c[k]) - arr.c[k][i]) <= 1e-9 * max(1.0, abs(float(jm.c[k])))
        assert abs(float(step_integral(mpf(ts[i]))) - ints[i]) < 1e-14


def test_array_jet_shares_algorithms():
    x = ArrayJet.variable(np.array([0.2, 0.5]), 3)
    e = x.exp()
    assert np.allclose(e.c[3], np.exp([0.2, 0.5]) / 6)
