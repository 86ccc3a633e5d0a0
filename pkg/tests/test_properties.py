"""Property suites: containment against exact or high-precision references.

Runs standalone in well under a minute: ``pytest tests/test_properties.py``.
"""

from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetproof.curve import ChainValidator, CircleProblem
from hetproof.interval import ComplexInterval, Interval, matmul
from hetproof.lohner import hess_algebra, propagate
from hetproof.lomeli import LomeliMap, LomeliParams, fixed_points
from hetproof.manifold import STABLE, defect_bound, formal_residual, solve_homological
from hetproof.seeds import circle_seeds

import oracles

SAMPLES = 10_000


def _random_intervals(rng, n, lo=-100.0, hi=100.0):
    """Endpoints over several magnitudes plus a member point of each interval."""
    scale = 10.0 ** rng.integers(-6, 3, n)
    a = rng.uniform(lo, hi, n) * scale / 100.0
    w = rng.uniform(0, 1, n) * scale * 10.0 ** rng.integers(-12, 0, n)
    w[rng.random(n) < 0.1] = 0.0  # some thin intervals
    x = Interval(a, a + w)
    m = np.clip(a + rng.uniform(0, 1, n) * w, x.lo, x.hi)
    return x, m


def _all_contain(res: Interval, exact):
    lo = res.lo.tolist()
    hi = res.hi.tolist()
    return all(Fraction(l) <= e <= Fraction(h) for l, h, e in zip(lo, hi, exact))


F = Fraction


# -- interval arithmetic ---------------------------------------------------------

@pytest.mark.parametrize("seed,op", list(enumerate(["add", "sub", "mul", "sqr", "pow3"])))
def test_containment_polynomial_ops(seed, op):
    rng = np.random.default_rng(seed)
    x, mx = _random_intervals(rng, SAMPLES)
    y, my = _random_intervals(rng, SAMPLES)
    fx = [F(v) for v in mx.tolist()]
    fy = [F(v) for v in my.tolist()]
    if op == "add":
        res, ex = x + y, [a + b for a, b in zip(fx, fy)]
    elif op == "sub":
        res, ex = x - y, [a - b for a, b in zip(fx, fy)]
    elif op == "mul":
        res, ex = x * y, [a * b for a, b in zip(fx, fy)]
    elif op == "sqr":
        res, ex = x.sqr(), [a * a for a in fx]
    else:
        res, ex = x ** 3, [a ** 3 for a in fx]
    assert _all_contain(res, ex)


def test_containment_division():
    rng = np.random.default_rng(21)
    x, mx = _random_intervals(rng, SAMPLES)
    y, my = _random_intervals(rng, SAMPLES)
    sign = np.where(rng.random(SAMPLES) < 0.5, -1.0, 1.0)
    # shift the divisors away from zero
    off = sign * (1e-3 + np.abs(y.lo))
    y = Interval(np.minimum(off, off + sign * y.width()), np.maximum(off, off + sign * y.width()))
    my = np.clip(off + sign * 0.5 * y.width(), y.lo, y.hi)
    res = x / y
    ex = [F(a) / F(b) for a, b in zip(mx.tolist(), my.tolist())]
    assert _all_contain(res, ex)


def test_containment_sqrt():
    rng = np.random.default_rng(22)
    x, mx = _random_intervals(rng, SAMPLES, lo=0.0, hi=100.0)
    res = x.sqrt()
    # sqrt(m) in [l, h]  <=>  l^2 <= m <= h^2 for l, h >= 0
    assert np.all(res.lo >= 0.0)
    assert all(F(l) ** 2 <= F(m) <= F(h) ** 2 for l, h, m in zip(res.lo.tolist(), res.hi.tolist(), mx.tolist()))


@pytest.mark.parametrize("fn", ["exp", "log"])
def test_containment_exp_log(fn):
    rng = np.random.default_rng(23)
    if fn == "exp":
        x, mx = _random_intervals(rng, SAMPLES, lo=-50.0, hi=50.0)
        res = x.exp()
        ref = [mp.exp(mp.mpf(v)) for v in mx.tolist()]
    else:
        x, mx = _random_intervals(rng, SAMPLES, lo=1e-3, hi=100.0)
        mx = np.maximum(mx, x.lo)
        ok = x.lo > 0
        x, mx = x[ok], mx[ok]
        res = x.log()
        ref = [mp.log(mp.mpf(v)) for v in mx.tolist()]
    assert all(mp.mpf(l) <= r <= mp.mpf(h) for l, h, r in zip(res.lo.tolist(), res.hi.tolist(), ref))


def test_containment_matmul():
    rng = np.random.default_rng(24)
    n = SAMPLES // 3 + 1
    A, mA = _random_intervals(rng, 9 * n)
    v, mv = _random_intervals(rng, 3 * n)
    A, mA = A.reshape(n, 3, 3), mA.reshape(n, 3, 3)
    v, mv = v.reshape(n, 3, 1), mv.reshape(n, 3, 1)
    res = matmul(A, v)[..., 0]
    ex = []
    for b in range(n):
        for i in range(3):
            ex.append(sum(F(mA[b, i, j]) * F(mv[b, j, 0]) for j in range(3)))
    assert _all_contain(res.reshape(-1), ex)


def test_containment_complex_product():
    rng = np.random.default_rng(25)
    a, ma = _random_intervals(rng, SAMPLES)
    b, mb = _random_intervals(rng, SAMPLES)
    c, mc = _random_intervals(rng, SAMPLES)
    d, md = _random_intervals(rng, SAMPLES)
    p = ComplexInterval(a, b) * ComplexInterval(c, d)
    re = [F(w) * F(y) - F(x) * F(z) for w, x, y, z in zip(ma.tolist(), mb.tolist(), mc.tolist(), md.tolist())]
    im = [F(w) * F(z) + F(x) * F(y) for w, x, y, z in zip(ma.tolist(), mb.tolist(), mc.tolist(), md.tolist())]
    assert _all_contain(p.re, re) and _all_contain(p.im, im)


# -- Hessian-sequence identity ----------------------------------------------------------

@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.integers(0, 2 ** 32 - 1))
def test_hess_identity_integer_instances(seed):
    rng = np.random.default_rng(seed)
    n, m, c = [int(v) for v in rng.integers(1, 6, 3)]
    B = rng.integers(-20, 21, (n, n))
    b = rng.integers(-20, 21, m)
    Aq = rng.integers(-20, 21, (n, m, c))
    assert np.array_equal(B @ hess_algebra("bT_A", b, Aq), hess_algebra("bT_A", b, hess_algebra("B_star", B, Aq)))


# -- charts -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def arc_fps():
    p = LomeliParams.from_dict(oracles.ARC)
    return p, fixed_points(p)


@pytest.mark.parametrize("N", [3, 10, 45])
def test_homological_residual_encloses_zero(arc_fps, N):
    p, fps = arc_fps
    for fp in fps:
        R = formal_residual(solve_homological(fp, N, 1.0, p))
        assert np.all(R.re.lo <= 0.0) and np.all(R.re.hi >= 0.0)
        assert np.all(R.im.lo <= 0.0) and np.all(R.im.hi >= 0.0)


@pytest.mark.parametrize("which", [0, 1])
@pytest.mark.parametrize("N", [10, 20])
def test_defect_bound_dominates_samples(arc_fps, which, N):
    p, fps = arc_fps
    ch = solve_homological(fps[which], N, 1.0, p)
    bound = defect_bound(ch)
    rng = np.random.default_rng(N + which)
    r = np.sqrt(rng.random((2, SAMPLES)))
    a = rng.uniform(0, 2 * np.pi, (2, SAMPLES))
    v, w = r[0] * np.exp(1j * a[0]), r[1] * np.exp(1j * a[1])
    lam = complex(ch.eig.mid())
    a_, b_, c_, al, tau = p.floats()
    x, y, z = ch.eval_complex(v, w).T
    if ch.kind == STABLE:
        fx = np.stack([z + al + tau * x + a_ * x * x + b_ * x * y + c_ * y * y, x, y])
        target = ch.eval_complex(lam * v, np.conj(lam) * w).T
    else:
        fx = np.stack([y, z, x - al - tau * y - a_ * y * y - b_ * y * z - c_ * z * z])
        target = ch.eval_complex(v / lam, w / np.conj(lam)).T
    defect = np.abs(fx - target).max()
    assert defect <= bound


@pytest.fixture(scope="module")
def arc_charts45(arc_fps):
    from hetproof.manifold import build_chart
    p, (fu, fs) = arc_fps
    return build_chart(fu, p, 45, 1.3), build_chart(fs, p, 45, 1.3)


def test_chart_eval_contains_polynomial_values(arc_charts45):
    rng = np.random.default_rng(31)
    for ch in arc_charts45:
        coeffs = oracles.coeff_dict_from_mid(ch)
        for _ in range(6):
            s, t = rng.uniform(-0.6, 0.6, 2)
            val, grad = ch.eval(s, t)
            ref, dref = oracles.chart_value(coeffs, mp.mpf(s), mp.mpf(t))
            for j in range(3):
                assert oracles.in_interval(ref[j], val.lo[j], val.hi[j])
                assert oracles.in_interval(dref[j][0], grad.lo[j, 0], grad.hi[j, 0])
                assert oracles.in_interval(dref[j][1], grad.lo[j, 1], grad.hi[j, 1])


def test_chart_eval_is_invariant(arc_charts45, arc_fps):
    p, _ = arc_fps
    m = LomeliMap(p)
    rng = np.random.default_rng(32)
    for ch in arc_charts45:
        L = ch.linear_dynamics()
        if ch.kind != STABLE:
            from hetproof.curve import inverse_linear
            L = inverse_linear(L)
        direction = 1 if ch.kind == STABLE else -1
        for _ in range(20):
            th = Interval.point(rng.uniform(-0.5, 0.5, 2))
            img = m.apply(ch.eval(th[0], th[1])[0], direction)
            th2 = matmul(L, th[:, None])[:, 0]
            other = ch.eval(th2[0], th2[1])[0]
            assert np.all(img.overlaps(other))


@pytest.mark.parametrize("case", ["LOOP", "ARC"])
def test_propagate_contains_orbit(case):
    d = getattr(oracles, case)
    P = oracles.mp_params(d)
    m = LomeliMap(LomeliParams.from_dict(d))
    rng = np.random.default_rng(33)
    c = rng.uniform(-0.3, 0.3, (5, 3))
    box = Interval(c - 1e-6, c + 1e-6)
    for k in (9, -9):
        S, D = propagate(m, box, k)
        enc, der = S.enclosure(), D.enclosure(S.b)
        for i in range(len(c)):
            corner = box.hi[i] if k > 0 else box.lo[i]
            for pt in (c[i], corner):
                y, J = oracles.iterate(pt.tolist(), P, k, deriv=True)
                assert all(oracles.in_interval(y[r], enc.lo[i, r], enc.hi[i, r]) for r in range(3))
                if pt is c[i]:
                    assert all(oracles.in_interval(J[r, s], der.lo[i, r, s], der.hi[i, r, s])
                               for r in range(3) for s in range(3))


# -- curves -------------------------------------------------------------------------------

def test_toy_circle_chain_validates():
    cert = ChainValidator(CircleProblem()).run(circle_seeds(64).points)
    assert cert.passed and len(cert.segments) == 64
