import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetproof.errors import (DivisionByIntervalContainingZero, NegativeSqrtDomain, ShapeMismatch,
                             SingularEnclosure)
from hetproof.interval import (ComplexInterval, Interval, contains, eye, matmul, midrad_matmul, norm_inf,
                               solve, solve_batch, stack)

from oracles import brute_row_sum


def iv(lo, hi=None):
    return Interval(np.asarray(lo, float), np.asarray(lo if hi is None else hi, float))


# -- scalar arithmetic --------------------------------------------------------

def test_add_exact_endpoints():
    r = Interval(1.0, 2.0) + Interval(3.0, 4.0)
    assert (float(r.lo), float(r.hi)) == (4.0, 6.0)


def test_mul_endpoint_products():
    r = Interval(-1.0, 2.0) * Interval(3.0, 4.0)
    assert (float(r.lo), float(r.hi)) == (-4.0, 8.0)


def test_sqrt_monotone():
    r = Interval(1.0, 4.0).sqrt()
    assert (float(r.lo), float(r.hi)) == (1.0, 2.0)


def test_division_by_zero_interval():
    with pytest.raises(DivisionByIntervalContainingZero):
        Interval(1.0, 1.0) / Interval(0.0, 1.0)


def test_negative_sqrt():
    with pytest.raises(NegativeSqrtDomain):
        Interval(-1.0, 1.0).sqrt()


def test_thin_intervals_are_accepted():
    x = Interval(0.1, 0.1)
    y = x * x - x / 3.0
    assert y.contains(Fraction(0.1) ** 2 - Fraction(0.1) / 3)


def test_outward_rounding_of_inexact_sum():
    r = Interval(0.1, 0.1) + Interval(0.2, 0.2)
    exact = Fraction(0.1) + Fraction(0.2)
    assert Fraction(float(r.lo)) < exact < Fraction(float(r.hi))


# -- matrices -------------------------------------------------------------------

def test_identity_times_box():
    U = iv([-1.0, -1.0], [1.0, 1.0])
    r = matmul(eye(2), U[:, None])[:, 0]
    assert contains(U, r, strict=False)
    assert np.array_equal(r.lo, U.lo) and np.array_equal(r.hi, U.hi)


def test_interval_row_times_interval():
    r = matmul(iv([[0.0]], [[1.0]]), iv([1.0], [2.0]))
    assert (float(r.lo[0]), float(r.hi[0])) == (0.0, 2.0)


def test_matmul_shape_mismatch():
    with pytest.raises(Exception) as exc:
        matmul(eye(2), iv(np.zeros(3))[:, None])
    assert isinstance(exc.value, (ShapeMismatch, ValueError))


def test_midrad_matmul_contains_members():
    rng = np.random.default_rng(3)
    Am, Ar = rng.normal(size=(5, 4)), 1e-3 * rng.random((5, 4))
    Bm, Br = rng.normal(size=(4, 3)), 1e-3 * rng.random((4, 3))
    C = midrad_matmul(Am, Ar, Bm, Br)
    for _ in range(50):
        A = Am + Ar * rng.uniform(-1, 1, Ar.shape)
        B = Bm + Br * rng.uniform(-1, 1, Br.shape)
        assert np.all(C.contains(A @ B))


# -- solve ----------------------------------------------------------------------

def test_solve_identity():
    b = iv([1.0, 3.0], [2.0, 4.0])
    x = solve(eye(2), b)
    assert contains(b, x, strict=False)


def test_solve_scalar_interval():
    x = solve(iv([[1.8]], [[2.2]]), iv([0.0], [0.01]))
    assert x.lo[0] <= 0.0 and x.hi[0] >= 0.01 / 1.8


def test_solve_singular_member():
    with pytest.raises(SingularEnclosure):
        solve(iv([[-1.0]], [[1.0]]), iv([1.0]))


def test_solve_contains_member_solutions():
    rng = np.random.default_rng(7)
    Am = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    A = Interval(Am - 1e-3, Am + 1e-3)
    b = Interval(np.array([1.0, -1.0, 0.5, 2.0]) - 1e-3, np.array([1.0, -1.0, 0.5, 2.0]) + 1e-3)
    x = solve(A, b)
    for _ in range(100):
        M = Am + rng.uniform(-1e-3, 1e-3, (4, 4))
        v = b.mid() + rng.uniform(-1e-3, 1e-3, 4)
        assert np.all(x.contains(np.linalg.solve(M, v)))


def test_solve_batch_flags():
    A = stack([iv([[2.0]]), iv([[-1.0]], [[1.0]])], 0)
    x, ok = solve_batch(A, stack([iv([1.0]), iv([1.0])], 0))
    assert ok.tolist() == [True, False]
    assert x[0].contains(0.5).all()


# -- norm and containment --------------------------------------------------------

def test_norm_identity():
    assert norm_inf(eye(3)) == 1.0


def test_norm_row_sum():
    assert norm_inf(iv([[1.0, -2.0], [0.0, 0.0]])) == 3.0


def test_norm_random_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(20):
        M = rng.normal(size=(4, 4))
        val = norm_inf(Interval.point(M))
        assert Fraction(float(val)) >= brute_row_sum(M)
        assert val <= float(brute_row_sum(M)) * (1 + 1e-15)


@pytest.mark.parametrize("inner,outer,strict,expected", [
    ((0.0, 1.0), (-1.0, 2.0), True, True),
    ((0.0, 1.0), (0.0, 2.0), True, False),
    ((0.0, 1.0), (0.0, 2.0), False, True),
])
def test_contains_examples(inner, outer, strict, expected):
    assert contains(iv([inner[0]], [inner[1]]), iv([outer[0]], [outer[1]]), strict=strict) is expected


def test_contains_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        contains(iv([0.0]), iv([0.0, 1.0]))


# -- complex ------------------------------------------------------------------------

def test_complex_product_rectangular():
    z = ComplexInterval(Interval(1.0, 2.0), Interval(-1.0, 1.0))
    w = ComplexInterval(Interval(0.5, 0.5), Interval(2.0, 2.0))
    p = z * w
    for a in (1.0, 1.5, 2.0):
        for b in (-1.0, 0.0, 1.0):
            assert p.contains(complex(a, b) * complex(0.5, 2.0))


# -- serialization ----------------------------------------------------------------

floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(floats, floats)
def test_json_round_trip_exact(a, b):
    lo, hi = min(a, b), max(a, b)
    x = Interval(lo, hi)
    y = Interval.from_json(json.loads(json.dumps(x.to_json())))
    assert float(y.lo) == lo and float(y.hi) == hi


def test_json_decimal_strings_round_outward():
    # a non-canonical decimal is enclosed by the neighbouring doubles
    y = Interval.from_json(["0.10000000000000000001", "0.10000000000000000001"])
    q = Fraction("0.10000000000000000001")
    assert Fraction(float(y.lo)) < q < Fraction(float(y.hi))


def test_json_canonical_repr_denotes_its_double():
    y = Interval.from_json(["0.1", "0.1"])
    assert float(y.lo) == 0.1 == float(y.hi)


# -- inclusion monotonicity ----------------------------------------------------------

small = st.floats(min_value=-50, max_value=50, allow_nan=False)


def nested(draw):
    a, b = sorted([draw(small), draw(small)])
    s, t = sorted([draw(small), draw(small)])
    return Interval(min(a, s), max(b, t)), Interval(a, b)


@st.composite
def nested_pairs(draw):
    return nested(draw), nested(draw)


@settings(max_examples=300, deadline=None)
@given(nested_pairs())
def test_inclusion_monotonicity(pairs):
    (A, a), (B, b) = pairs
    for op in (lambda x, y: x + y, lambda x, y: x - y, lambda x, y: x * y):
        small_r, big_r = op(a, b), op(A, B)
        assert big_r.lo <= small_r.lo and small_r.hi <= big_r.hi
    if B.lo > 0:
        small_r, big_r = a / b, A / B
        assert big_r.lo <= small_r.lo and small_r.hi <= big_r.hi
