import json

import mpmath as mp
import numpy as np
import pytest
from scipy.signal import convolve2d

from hetproof.errors import OrderTooLow, OutsideShrunkDomain, WindowEmpty
from hetproof.interval import ComplexInterval, Interval
from hetproof.manifold import (STABLE, UNSTABLE, ValidationValues, build_chart, chart_eval, chart_from_json,
                               defect_bound, rescale, solve_homological, validate_tail, validation_values)
from hetproof.lomeli import LomeliParams

import oracles


@pytest.fixture(scope="module")
def stable10(arc_params, arc_fixed_points):
    return solve_homological(arc_fixed_points[1], 10, 1.0, arc_params)


def _coeff(chart, j, k, l):
    return chart.coeffs.re[j, k, l], chart.coeffs.im[j, k, l]


def test_first_order_constraints(arc_params, arc_fixed_points):
    fp = arc_fixed_points[1]
    ch = solve_homological(fp, 1, 1.0, arc_params)
    for j in range(3):
        re, im = _coeff(ch, j, 0, 0)
        assert np.array_equal(re.lo, fp.point[j].lo) and np.array_equal(im.hi, 0.0)
        re, im = _coeff(ch, j, 1, 0)
        assert np.array_equal(re.lo, fp.eigvec_pair.re[j].lo) and np.array_equal(im.hi, fp.eigvec_pair.im[j].hi)
        re2, im2 = _coeff(ch, j, 0, 1)
        assert np.array_equal(re2.lo, re.lo) and np.array_equal(im2.lo, -im.hi)


def test_conjugate_symmetry(stable10):
    P = stable10.coeffs
    Pre, Pim = P.re, P.im
    sw_re = Pre.swapaxes(1, 2)
    sw_im = Pim.swapaxes(1, 2)
    # conj(p_kl) and p_lk must overlap (both enclose the same number)
    assert np.all(np.maximum(Pre.lo, sw_re.lo) <= np.minimum(Pre.hi, sw_re.hi))
    assert np.all(np.maximum(-Pim.hi, sw_im.lo) <= np.minimum(-Pim.lo, sw_im.hi))


def test_homological_against_mpmath(arc_params, arc_fixed_points):
    P = oracles.mp_params(oracles.ARC)
    for fp in arc_fixed_points:
        ch = solve_homological(fp, 10, 1.0, arc_params)
        t = [t for t in oracles.fixed_point_ts(P) if oracles.in_interval(t, fp.t.lo, fp.t.hi)][0]
        lam = oracles.eigen_pair(t, P)
        ref = oracles.homological(P, t, lam, mp.mpf(fp.eigvec_scale), 10)
        for (k, l), v in ref.items():
            for j in range(3):
                re, im = _coeff(ch, j, k, l)
                # slack only absorbs the 50-digit noise of the reference (diagonal terms are real)
                assert oracles.in_interval(mp.re(v[j]), re.lo, re.hi, slack=1e-40), (k, l, j)
                assert oracles.in_interval(mp.im(v[j]), im.lo, im.hi, slack=1e-40), (k, l, j)


def _series_residual(chart):
    """Floating ``f(P) - P(lambda v, conj(lambda) w)`` coefficients through the chart order."""
    P = chart.coeffs.mid()
    a, b, c, al, tau = chart.params.floats()
    N = chart.order
    lam = complex(chart.eig.mid())
    x, y, z = P
    quad = a * convolve2d(x, x) + b * convolve2d(x, y) + c * convolve2d(y, y)
    quad = quad[: N + 1, : N + 1]
    f0 = z + tau * x + quad
    f0[0, 0] += al
    k = np.arange(N + 1)
    mu = lam ** k[:, None] * np.conj(lam) ** k[None, :]
    res = np.stack([f0 - mu * x, x - mu * y, y - mu * z])
    mask = (k[:, None] + k[None, :]) <= N
    return np.abs(res[:, mask]).max()


@pytest.mark.parametrize("which", [0, 1])
def test_order5_composition_residual(arc_params, arc_fixed_points, which):
    ch = solve_homological(arc_fixed_points[which], 5, 1.0, arc_params)
    assert _series_residual(ch) < 1e-13


def test_rescale_identity(stable10):
    r = rescale(stable10, 1.0)
    assert np.array_equal(r.coeffs.re.lo, stable10.coeffs.re.lo)
    assert np.array_equal(r.coeffs.im.hi, stable10.coeffs.im.hi)


def test_rescale_half_scales_by_power(stable10):
    r = rescale(stable10, 0.5)
    for j in range(3):
        re, _ = _coeff(stable10, j, 2, 3)
        re2, _ = _coeff(r, j, 2, 3)
        assert re2.lo == re.lo * 0.5 ** 5 and re2.hi == re.hi * 0.5 ** 5


def test_rescale_matches_resolve(arc_params, arc_fixed_points, stable10):
    r = rescale(stable10, 0.5)
    s = solve_homological(arc_fixed_points[1], 10, 0.5, arc_params)
    for part_a, part_b in ((r.coeffs.re, s.coeffs.re), (r.coeffs.im, s.coeffs.im)):
        assert np.all(np.maximum(part_a.lo, part_b.lo) <= np.minimum(part_a.hi, part_b.hi))


def test_rescale_requires_positive(stable10):
    with pytest.raises(ValueError):
        rescale(stable10, 0.0)


def test_defect_of_linear_map_is_zero(stable10):
    lin = LomeliParams.from_values("0", "0", "0", "-1/4", "-3/10", check_normalized=False)
    ch = solve_homological(stable10.fixed_point, 1, 1.0, stable10.params)
    ch.params = lin
    assert 0.0 <= defect_bound(ch) < 1e-300


def test_validation_values_arc(stable10):
    vv = validation_values(stable10)
    assert vv.K2 == pytest.approx(0.88) and vv.K2 >= 0.88
    assert vv.N_f == 3
    assert vv.R_prime < vv.R
    lam = stable10.fixed_point.eigenvalue_pair
    assert vv.mu_star >= float(lam.abs().hi) and vv.mu_star < 1


def test_validate_tail_trivial_order_check(stable10):
    ch = solve_homological(stable10.fixed_point, 1, 1.0, stable10.params)
    vv = ValidationValues(eps_tol=0.0, R_prime=0.1, R=1.1, mu_star=0.5, K1=1.0, K2=1.0, N_f=3)
    cert = validate_tail(ch, vv, store=False)
    assert cert.c2 < cert.delta < cert.c1


def test_validate_tail_window_empty(arc_charts):
    vv = validation_values(arc_charts[1])
    vv.eps_tol = 1.0
    with pytest.raises(WindowEmpty):
        validate_tail(arc_charts[1], vv, store=False)


def test_validate_tail_order_too_low(stable10):
    vv = validation_values(stable10)
    vv.K1 = 1e6
    with pytest.raises(OrderTooLow):
        validate_tail(stable10, vv, store=False)


@pytest.mark.parametrize("kind_idx", [0, 1])
def test_order_increase_keeps_order_condition(arc_params, arc_fixed_points, kind_idx):
    fp = arc_fixed_points[kind_idx]
    passed = False
    for N in (8, 14, 20, 26):
        ch = solve_homological(fp, N, 1.0, arc_params)
        try:
            validate_tail(ch, validation_values(ch), store=False)
            passed = True
        except OrderTooLow:
            assert not passed, f"order {N} lost the order condition"
        except WindowEmpty:
            pass


def test_chart_kinds(arc_charts):
    cu, cs = arc_charts
    assert cu.kind == UNSTABLE and cs.kind == STABLE


def test_chart_eval_at_origin(arc_charts):
    for ch in arc_charts:
        v, _ = chart_eval(ch, 0.0, 0.0)
        d = ch.tail_delta
        assert np.all(v.contains(ch.fixed_point.point.mid()))
        assert np.all(v.width() >= 2 * d)
        # beyond the tail box only the coefficient and summation rounding remains
        assert np.all(v.width() <= 2 * d + 1e-12)


def test_chart_eval_linear_derivative(arc_params, arc_fixed_points):
    fp = arc_fixed_points[1]
    ch = solve_homological(fp, 1, 1.0, arc_params)
    ch.tail_delta = 0.0
    _, g = chart_eval(ch, 0.0, 0.0)
    xi = fp.eigvec_pair.mid()
    assert np.all(g[:, 0].contains(2 * xi.real))
    assert np.all(g[:, 1].contains(-2 * xi.imag))


def test_chart_eval_outside_domain(arc_charts):
    with pytest.raises(OutsideShrunkDomain):
        chart_eval(arc_charts[1], 0.99, 0.0)


def test_thin_tail_limit(arc_charts):
    ch = arc_charts[1]
    saved = ch.tail_delta
    v1, _ = chart_eval(ch, 0.3, -0.2)
    try:
        ch.tail_delta = 0.0
        v0, _ = chart_eval(ch, 0.3, -0.2)
    finally:
        ch.tail_delta = saved
    assert np.allclose(v1.width() - v0.width(), 2 * saved, rtol=1e-6, atol=1e-15)
    assert np.all(v1.lo <= v0.lo) and np.all(v0.hi <= v1.hi)


def test_chart_json_round_trip(arc_charts):
    cu = arc_charts[0]
    data = json.loads(json.dumps(cu.to_json()))
    back = chart_from_json(data, cu.params, cu.fixed_point)
    assert np.array_equal(back.coeffs.re.lo, cu.coeffs.re.lo)
    assert np.array_equal(back.coeffs.im.hi, cu.coeffs.im.hi)
    assert back.tail_delta == cu.tail_delta and back.scaling == cu.scaling


def test_build_chart_meets_target(arc_charts):
    for ch in arc_charts:
        assert ch.tail_delta < 1e-10
        assert ch.tail.c2 < ch.tail_delta < ch.tail.c1
