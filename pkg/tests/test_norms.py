from fractions import Fraction
from fractions import Fraction as F

import pytest

from fastconj.circlemaps import compose, cyclic_lift, identity, rotation
from fastconj.generators import make_stage_III_lambda
from fastconj.norms import C, abs_norm, bell, bound_compose, bound_conjugated_rotations, cr_dist, cr_norm


@pytest.fixture(scope="module")
def base():
    return make_stage_III_lambda(4, Fraction(1, 64)).map


def test_constants():
    assert [bell(k) for k in range(6)] == [1, 1, 2, 5, 15, 52]
    assert C(1) == 2 * 4 * 2


def test_identity_and_rotation():
    assert abs_norm(identity(), 2) == 1.0
    assert cr_norm(rotation(Fraction(1, 7)), 0).value == pytest.approx(1 / 7, rel=1e-12)
    assert cr_norm(identity(), 3).value == 0


def test_lift_scaling_law(base):
    r, Q = 2, 5
    b = cr_norm(base, r).per_order
    lifted = cr_norm(cyclic_lift(base, Q), r).per_order
    for k in range(r + 1):
        assert lifted[k] == pytest.approx(b[k] * float(Q) ** (k - 1), rel=1e-6)


def test_distance_symmetric_and_zero(base):
    assert cr_dist(base, base, 1).value == 0
    g = compose(rotation(Fraction(1, 100)), base)
    assert cr_dist(base, g, 1).value == pytest.approx(cr_dist(g, base, 1).value, rel=1e-9)


def test_compose_bound_sound(base):
    r = 1
    h = cyclic_lift(base, 3)
    fg = compose(h, base)
    full, partial = bound_compose(abs_norm(h, r), abs_norm(base, r), r, cr_norm(h, r).value)
    assert cr_norm(fg, r).value <= full
    assert cr_dist(fg, base, r).value <= 2 * full


def test_conjugated_rotation_bound(base):
    r = 1
    h = base
    a, b = Fraction(1, 3), Fraction(1, 3) + Fraction(1, 10**4)
    conj = lambda t: compose(compose(h, rotation(t)), h.inverse())
    assert bound_conjugated_rotations(abs_norm(h, r + 1), r, 0) == 0
    d = cr_dist(conj(a), conj(b), r).value
    assert d <= bound_conjugated_rotations(abs_norm(h, r + 1), r, float(b - a))


def test_displacement_uses_best_lift_translate():
    assert cr_norm(rotation(F(9, 10)), 0).value == pytest.approx(0.1, rel=1e-12)
    assert cr_norm(make_stage_III_lambda(4, F(1, 100)).map, 0).value < 1 / 3


def test_displacement_beyond_half_not_clipped():
    from fastconj.generators import make_stage_III_0
    h = make_stage_III_0(1, F(1, 400)).map
    v = cr_norm(h, 0).value
    assert 0.5 < v < F(26, 40)
    assert cr_norm(cyclic_lift(h, 7), 0).value == pytest.approx(v / 7, rel=1e-9)
