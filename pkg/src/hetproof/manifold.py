"""Taylor parameterizations of the 2-D stable and unstable manifolds.

A chart is a polynomial ``P(v, w) = sum p_kl v^k w^l`` with
``f(P(v, w)) = P(lambda v, conj(lambda) w)`` solved order by order.  Because
``Df(p)`` has companion structure the homological system
``(Df(p) - mu I) p_kl = (s_kl, 0, 0)`` with ``mu = lambda^k conj(lambda)^l``
reduces to scalar divisions by the characteristic polynomial at ``mu``.

The unstable chart is certified as the stable manifold of ``f^{-1}``, whose
conjugacy uses the eigenvalue ``1/lambda`` and the same coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DivisionByIntervalContainingZero,
    HyperbolicityMarginTooSmall,
    OrderTooLow,
    OutsideShrunkDomain,
    SingularHomologicalMatrix,
    ValidationError,
    WindowEmpty,
)
from .interval import (
    ComplexInterval,
    Interval,
    cconv2,
    dn,
    exp_neg,
    group_sum,
    midrad_matmul,
    mul_loose,
    up,
)
from .lomeli import FixedPointData, LomeliMap, LomeliParams

STABLE = "stable"
UNSTABLE = "unstable"

AMBIENT_DIM = 3


@dataclass
class ValidationValues:
    eps_tol: float
    R_prime: float
    R: float
    mu_star: float
    K1: float
    K2: float
    N_f: int

    def to_json(self):
        return {k: (repr(float(v)) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


@dataclass
class TailCertificate:
    delta: float
    order: int
    c1: float
    c2: float
    order_bound: float

    def to_json(self):
        return {k: (repr(float(v)) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


@dataclass
class TaylorChart:
    """Certified polynomial chart of a 2-D invariant manifold."""

    coeffs: ComplexInterval  # shape (3, N+1, N+1), indexed [component, k, l]
    order: int
    eig: ComplexInterval
    kind: str
    scaling: float
    fixed_point: FixedPointData
    params: LomeliParams
    real_coeffs: Interval = None  # shape (3, N+1, N+1), indexed [component, i, j] for s^i t^j
    tail_delta: float | None = None
    sigma: float = 0.05
    validation: ValidationValues | None = None
    tail: TailCertificate | None = None
    base_scaling: float | None = None
    rescales: tuple = ()
    _eval_cache: dict = field(default_factory=dict, repr=False)

    # -- evaluation --------------------------------------------------------
    def _coeff_matrix(self):
        if "C" not in self._eval_cache:
            R = self.real_coeffs
            N = self.order
            n1 = N + 1
            ii = np.arange(n1)[:, None]
            jj = np.arange(n1)[None, :]
            grids = []

            def shifted(di, dj, fac):
                lo = np.zeros((3, n1, n1))
                hi = np.zeros((3, n1, n1))
                lo[:, :n1 - di, :n1 - dj] = R.lo[:, di:, dj:]
                hi[:, :n1 - di, :n1 - dj] = R.hi[:, di:, dj:]
                return Interval(lo, hi) * fac

            grids.append(shifted(0, 0, np.ones((n1, n1))))
            grids.append(shifted(1, 0, (ii + 1.0) * np.ones((1, n1))))
            grids.append(shifted(0, 1, np.ones((n1, 1)) * (jj + 1.0)))
            grids.append(shifted(2, 0, ((ii + 1.0) * (ii + 2.0)) * np.ones((1, n1))))
            grids.append(shifted(1, 1, (ii + 1.0) * (jj + 1.0)))
            grids.append(shifted(0, 2, np.ones((n1, 1)) * ((jj + 1.0) * (jj + 2.0))))
            # rows ordered as (grid, component)
            tri = ((ii + jj) <= N).reshape(-1)
            lo = np.stack([g.lo.reshape(3, -1) for g in grids]).reshape(18, -1)[:, tri]
            hi = np.stack([g.hi.reshape(3, -1) for g in grids]).reshape(18, -1)[:, tri]
            C = Interval(lo, hi)
            I, J = np.nonzero((ii + jj) <= N)
            self._eval_cache["C"] = (C.mid().T.copy(), C.rad().T.copy(), I, J)
        return self._eval_cache["C"]

    def check_domain(self, s: Interval, t: Interval):
        """Boolean mask of boxes inside the shrunk disk ``s^2 + t^2 <= e^{-2 sigma}``."""
        r2 = (s.sqr() + t.sqr()).hi
        lim = exp_neg(2.0 * self.sigma).lo
        return r2 <= lim

    def jets(self, s: Interval, t: Interval, with_tail=True, check=True):
        """Value, gradient and Hessian enclosures over boxes ``s x t`` (batched).

        Returns ``(val (B,3), grad (B,3,2), hess (B,3,2,2))``.  With
        ``with_tail`` the tail bound is added to the value and the Cauchy bound
        to the gradient; the Hessian is always that of the polynomial part.
        """
        s = s if isinstance(s, Interval) else Interval.point(s)
        t = t if isinstance(t, Interval) else Interval.point(t)
        s = s.reshape(-1)
        t = t.reshape(-1)
        if check:
            inside = self.check_domain(s, t)
            if not np.all(inside):
                raise OutsideShrunkDomain("chart evaluated outside radius exp(-sigma)")
        N = self.order
        S = s.powers(N)
        T = t.powers(N)
        Cm, Cr, I, J = self._coeff_matrix()
        M = mul_loose(S[:, I], T[:, J])  # monomials s^i t^j with i + j <= N
        Mm = M.mid()
        Mr = M.rad()
        out = midrad_matmul(Mm, Mr if Mr.any() else None, Cm, Cr)  # (B, 18)
        out = out.reshape(-1, 6, 3)
        val = out[:, 0, :]
        grad = Interval(np.stack([out.lo[:, 1], out.lo[:, 2]], -1), np.stack([out.hi[:, 1], out.hi[:, 2]], -1))
        hl = np.stack([np.stack([out.lo[:, 3], out.lo[:, 4]], -1), np.stack([out.lo[:, 4], out.lo[:, 5]], -1)], -2)
        hh = np.stack([np.stack([out.hi[:, 3], out.hi[:, 4]], -1), np.stack([out.hi[:, 4], out.hi[:, 5]], -1)], -2)
        hess = Interval(hl, hh)
        if with_tail:
            if self.tail_delta is None:
                raise ValidationError("chart has no certified tail bound")
            d = self.tail_delta
            val = val + Interval(-d, d)
            cd = self.cauchy_bound()
            grad = grad + Interval(-cd, cd)
        return val, grad, hess

    def cauchy_bound(self) -> float:
        """Bound on each entry of the tail derivative with respect to (s, t).

        ``|dh/dv|, |dh/dw| <= 2 pi delta / sigma`` on the shrunk polydisk; a
        real-chart partial is a sum of two such terms.
        """
        d = Interval.from_value(self.tail_delta)
        c = (2.0 * (2.0 * Interval.from_value(math.pi).inflate(1.0, 1e-15) * d)) / Interval.from_value(self.sigma)
        return float(c.hi)

    def eval(self, s, t):
        """``(value (3,), derivative (3,2))`` at one box, tail included."""
        v, g, _ = self.jets(Interval.point(s) if not isinstance(s, Interval) else s,
                            Interval.point(t) if not isinstance(t, Interval) else t)
        return v[0], g[0]

    def eval_float(self, st):
        """Floating evaluation of value and derivative at points ``st`` (B, 2)."""
        st = np.atleast_2d(np.asarray(st, float))
        if "Cf" not in self._eval_cache:
            self._eval_cache["Cf"] = self.real_coeffs.mid()
        R = self._eval_cache["Cf"]
        N = self.order
        k = np.arange(N + 1)
        S = st[:, 0:1] ** k
        T = st[:, 1:2] ** k
        dS = np.concatenate([np.zeros((len(st), 1)), S[:, :-1] * k[1:]], 1)
        dT = np.concatenate([np.zeros((len(st), 1)), T[:, :-1] * k[1:]], 1)
        val = np.einsum("cij,bi,bj->bc", R, S, T)
        ds = np.einsum("cij,bi,bj->bc", R, dS, T)
        dt = np.einsum("cij,bi,bj->bc", R, S, dT)
        return val, np.stack([ds, dt], -1)

    def eval_complex(self, v, w):
        """High-precision-free complex evaluation of ``P^N(v, w)`` (floats)."""
        P = self.coeffs.mid()
        N = self.order
        k = np.arange(N + 1)
        V = np.asarray(v, complex)[..., None] ** k
        W = np.asarray(w, complex)[..., None] ** k
        return np.einsum("ckl,...k,...l->...c", P, V, W)

    # -- inner dynamics ------------------------------------------------------
    def linear_dynamics(self) -> Interval:
        """Interval matrix of ``lambda`` acting on (s, t) as a real 2x2 block."""
        lam = self.eig
        return Interval(np.array([[lam.re.lo, -lam.im.hi], [lam.im.lo, lam.re.lo]]),
                        np.array([[lam.re.hi, -lam.im.lo], [lam.im.hi, lam.re.hi]]))

    # -- export --------------------------------------------------------------
    def to_json(self):
        N = self.order
        kl = [(k, l) for k in range(N + 1) for l in range(N + 1) if k + l <= N]
        coeffs = [[k, l, self.coeffs.re[:, k, l].to_json(), self.coeffs.im[:, k, l].to_json()]
                  for k, l in kl]
        return {
            "kind": self.kind,
            "order": N,
            "scaling": repr(float(self.scaling)),
            "base_scaling": repr(float(self.base_scaling if self.base_scaling is not None else self.scaling)),
            "rescales": [repr(float(f)) for f in self.rescales],
            "sigma": repr(float(self.sigma)),
            "delta": repr(float(self.tail_delta)) if self.tail_delta is not None else None,
            "eigenvalue": self.eig.to_json(),
            "params": self.params.to_dict(),
            "fixed_point": self.fixed_point.to_json(),
            "validation_values": self.validation.to_json() if self.validation else None,
            "tail": self.tail.to_json() if self.tail else None,
            "coefficients": coeffs,
        }


# ----------------------------------------------------------------------------
# homological equations
# ----------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _pair_tables(N: int):
    """Index tables for the order-n Cauchy products used by the solver.

    For each n: arrays (ti, tj, ai, aj, bi, bj, grp) listing pairs
    alpha + beta = (k, l) with k + l = n, k >= l and 1 <= |alpha| <= n - 1.
    """
    tables = {}
    for n in range(2, N + 1):
        targets = [(k, n - k) for k in range(n, -1, -1) if k >= n - k]
        rows = []
        for g, (k, l) in enumerate(targets):
            for i in range(k + 1):
                for j in range(l + 1):
                    if 1 <= i + j <= n - 1:
                        rows.append((g, i, j, k - i, l - j))
        arr = np.array(rows, dtype=np.int64)
        tables[n] = (np.array(targets, dtype=np.int64), arr)
    return tables


def _eigen_powers(lam: ComplexInterval, n: int):
    """``lambda^k`` for k = 0..n as a ComplexInterval of shape (n+1,)."""
    re = [Interval.point(1.0)]
    im = [Interval.point(0.0)]
    z = ComplexInterval.point(1.0 + 0j)
    for _ in range(n):
        z = z * lam
        re.append(z.re)
        im.append(z.im)
    from .interval import stack

    return ComplexInterval(stack(re), stack(im))


def _charpoly_at(mu: ComplexInterval, r1: Interval, r2: Interval) -> ComplexInterval:
    return ((mu - r1) * mu - r2) * mu - 1.0


def solve_homological(fp: FixedPointData, order: int, scaling: float, params: LomeliParams,
                      kind: str | None = None, lmap: LomeliMap | None = None) -> TaylorChart:
    """Interval enclosure of the order-``order`` formal solution at ``fp``."""
    if order < 1:
        raise ValueError("order must be at least 1")
    lmap = lmap or LomeliMap(params)
    if kind is None:
        kind = STABLE if fp.stability == "stable_pair" else UNSTABLE
    N = order
    lam = fp.eigenvalue_pair
    J = lmap.jacobian(fp.point)
    r1, r2 = J[0, 0], J[0, 1]

    L = _eigen_powers(lam, N)
    Lc = L.conj()

    P = ComplexInterval.zeros((3, N + 1, N + 1))
    for j in range(3):
        P[j, 0, 0] = ComplexInterval(fp.point[j])
    xi = fp.eigvec_pair * float(scaling)
    P[:, 1, 0] = xi
    P[:, 0, 1] = xi.conj()

    a, b, c = params.a, params.b, params.c
    # W = a*P_x + b*P_y and V = c*P_y, kept for k + l < n
    W = ComplexInterval.zeros((N + 1, N + 1))
    V = ComplexInterval.zeros((N + 1, N + 1))

    def _update(ks, ls):
        px = P[0][ks, ls]
        py = P[1][ks, ls]
        W[ks, ls] = px * a + py * b
        V[ks, ls] = py * c

    _update(np.array([1, 0]), np.array([0, 1]))
    tables = _pair_tables(N) if N >= 2 else {}
    for n in range(2, N + 1):
        targets, rows = tables[n]
        g, ai, aj, bi, bj = rows.T
        Px = P[0]
        Py = P[1]
        prod = Px[ai, aj] * W[bi, bj] + Py[ai, aj] * V[bi, bj]
        G = len(targets)
        S = ComplexInterval(group_sum(prod.re, g, G), group_sum(prod.im, g, G))
        k, l = targets[:, 0], targets[:, 1]
        mu = L[k] * Lc[l]
        den = _charpoly_at(mu, r1, r2)
        try:
            p3 = S / den
        except DivisionByIntervalContainingZero as exc:
            raise SingularHomologicalMatrix(f"homological equation singular at order {n}") from exc
        p2 = mu * p3
        p1 = mu * p2
        comps = [p1, p2, p3]
        diag = k == l
        for j in range(3):
            cj = comps[j]
            if np.any(diag):
                im = cj.im.copy()
                if not np.all(im[diag].contains(0.0)):
                    raise SingularHomologicalMatrix("diagonal coefficient not real")
                im.lo[diag] = 0.0
                im.hi[diag] = 0.0
                cj = ComplexInterval(cj.re, im)
            P[j, k, l] = cj
            P[j, l, k] = cj.conj()
        _update(np.concatenate([k, l]), np.concatenate([l, k]))

    chart = TaylorChart(coeffs=P, order=N, eig=lam, kind=kind, scaling=float(scaling),
                        fixed_point=fp, params=params)
    chart.real_coeffs = real_chart_coeffs(P, N)
    return chart


@lru_cache(maxsize=128)
def _binomial_transform(n: int):
    """Gaussian-integer matrix G with (s+it)^k (s-it)^(n-k) = sum_m G[k,m] s^(n-m) t^m."""
    re = np.zeros((n + 1, n + 1))
    im = np.zeros((n + 1, n + 1))
    unit = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    for k in range(n + 1):
        l = n - k
        acc_re = [0] * (n + 1)
        acc_im = [0] * (n + 1)
        for u in range(k + 1):
            cu = math.comb(k, u)
            ur, ui = unit[u % 4]
            for v in range(l + 1):
                cv = math.comb(l, v)
                vr, vi = unit[(-v) % 4]
                # i^u * (-i)^v
                pr = ur * vr - ui * vi
                pi = ur * vi + ui * vr
                acc_re[u + v] += cu * cv * pr
                acc_im[u + v] += cu * cv * pi
        re[k] = acc_re
        im[k] = acc_im
    assert np.all(np.abs(re) < 2.0 ** 53) and np.all(np.abs(im) < 2.0 ** 53)
    return re, im


def real_chart_coeffs(P: ComplexInterval, N: int) -> Interval:
    """Coefficients of ``P(s+it, s-it)`` in the monomials ``s^i t^j``."""
    out_lo = np.zeros((3, N + 1, N + 1))
    out_hi = np.zeros((3, N + 1, N + 1))
    for n in range(N + 1):
        Gre, Gim = _binomial_transform(n)
        k = np.arange(n + 1)
        l = n - k
        pre = P.re[:, k, l]  # (3, n+1)
        pim = P.im[:, k, l]
        rre = pre @ Gre - pim @ Gim
        rim = pre @ Gim + pim @ Gre
        if not np.all(rim.contains(0.0)):
            raise ValidationError("real chart has non-real coefficient enclosure")
        m = np.arange(n + 1)
        out_lo[:, n - m, m] = rre.lo
        out_hi[:, n - m, m] = rre.hi
    return Interval(out_lo, out_hi)


def rescale(chart: TaylorChart, factor: float) -> TaylorChart:
    """Chart in the rescaled variables: ``p_kl -> factor^(k+l) p_kl``."""
    if not factor > 0:
        raise ValueError("rescaling factor must be positive")
    N = chart.order
    f = Interval.point(float(factor)).powers(2 * N)
    kk = np.arange(N + 1)
    F = f[kk[:, None] + kk[None, :]]
    mask = (kk[:, None] + kk[None, :]) <= N
    P = chart.coeffs
    re = P.re * F
    im = P.im * F
    re.lo[:, ~mask] = 0.0
    re.hi[:, ~mask] = 0.0
    im.lo[:, ~mask] = 0.0
    im.hi[:, ~mask] = 0.0
    Pn = ComplexInterval(re, im)
    out = TaylorChart(coeffs=Pn, order=N, eig=chart.eig, kind=chart.kind,
                      scaling=chart.scaling * float(factor), fixed_point=chart.fixed_point,
                      params=chart.params, sigma=chart.sigma,
                      base_scaling=chart.base_scaling if chart.base_scaling is not None else chart.scaling,
                      rescales=tuple(chart.rescales) + (float(factor),))
    out.real_coeffs = real_chart_coeffs(Pn, N)
    return out


# ----------------------------------------------------------------------------
# a-posteriori validation
# ----------------------------------------------------------------------------

def _quadratic_part(chart: TaylorChart) -> ComplexInterval:
    """Full Cauchy-product series of the quadratic part used by the defect.

    Stable chart (map f): ``a x^2 + b x y + c y^2`` of the first component.
    Unstable chart (map f^{-1}): ``a y^2 + b y z + c z^2`` of the third.
    """
    P = chart.coeffs
    pr = chart.params
    if chart.kind == STABLE:
        u, v = P[0], P[1]
    else:
        u, v = P[1], P[2]
    w1 = u * pr.a + v * pr.b
    w2 = v * pr.c
    return cconv2(u, w1) + cconv2(v, w2)


def defect_bound(chart: TaylorChart) -> float:
    """Upper bound for the defect on the unit polydisk.

    The defect of the exact order-N formal solution consists only of the
    orders N+1..2N of the quadratic part, summed in magnitude.
    """
    Q = _quadratic_part(chart)
    N = chart.order
    n = np.add.outer(np.arange(Q.shape[0]), np.arange(Q.shape[1]))
    mask = n > N
    mags = Q.mag()[mask]
    return float(Interval.point(mags).sum().hi)


def formal_residual(chart: TaylorChart) -> ComplexInterval:
    """Coefficients of ``f(P^N) - P^N o Lambda`` through order N, shape (3, N+1, N+1)."""
    P = chart.coeffs
    pr = chart.params
    N = chart.order
    L = _eigen_powers(chart.eig, N)
    mu = ComplexInterval(L.re[:, None], L.im[:, None]) * ComplexInterval(L.re[None, :], -L.im[None, :])
    Q = cconv2(P[0], P[0] * pr.a + P[1] * pr.b) + cconv2(P[1], P[1] * pr.c)
    Q = Q[: N + 1, : N + 1]
    x = P[2] + P[0] * pr.tau + Q
    x[0, 0] = x[0, 0] + ComplexInterval(pr.alpha)
    res0 = x - mu * P[0]
    res1 = P[0] - mu * P[1]
    res2 = P[1] - mu * P[2]
    kk = np.arange(N + 1)
    mask = (kk[:, None] + kk[None, :]) <= N
    out = ComplexInterval(
        Interval(np.stack([r.re.lo for r in (res0, res1, res2)]), np.stack([r.re.hi for r in (res0, res1, res2)])),
        Interval(np.stack([r.im.lo for r in (res0, res1, res2)]), np.stack([r.im.hi for r in (res0, res1, res2)])),
    )
    for part in (out.re, out.im):
        part.lo[:, ~mask] = 0.0
        part.hi[:, ~mask] = 0.0
    return out


def validation_values(chart: TaylorChart, margin: float | None = None) -> ValidationValues:
    """Validation values of the chart for the map whose stable manifold it is."""
    pr = chart.params
    N = chart.order
    P = chart.coeffs
    mags = P.mag()
    kk = np.arange(N + 1)
    mask = ((kk[:, None] + kk[None, :]) >= 1) & ((kk[:, None] + kk[None, :]) <= N)
    Rp = max(float(Interval.point(mags[j][mask]).sum().hi) for j in range(3))
    R = float(up(Rp + (max(1.0, Rp) if margin is None else margin)))

    mod = chart.eig.abs()
    if chart.kind == STABLE:
        mu = float(mod.hi)
    else:
        mu = float((1.0 / mod).hi)
    if not mu < 1.0:
        raise HyperbolicityMarginTooSmall("mu* is not below one")

    t = chart.fixed_point.t
    a, b, c, tau = pr.a, pr.b, pr.c, pr.tau
    # |r1|, |r2| of the relevant Jacobian entries over the complex ball D(p, R')
    Rpi = Interval.point(Rp)
    r1c = up((tau + (2.0 * a + b) * t).mag() + ((2.0 * abs(a) + abs(b)) * Rpi).hi)
    r2c = up(((b + 2.0 * c) * t).mag() + ((abs(b) + 2.0 * abs(c)) * Rpi).hi)
    # stable chart: Df^{-1} = [[0,1,0],[0,0,1],[1,-r1,-r2]] (adjugate, det = 1)
    # unstable chart: the inverse of D(f^{-1}) is Df at the shifted point; same row bound
    K1 = float((Interval.point(1.0) + Interval.point(float(r1c)) + Interval.point(float(r2c))).hi)
    K1 = max(K1, 1.0)
    K2 = float(np.max([(2.0 * abs(a)).hi, abs(b).hi, (2.0 * abs(c)).hi]))
    nz = [not bool((x.lo == 0) and (x.hi == 0)) for x in (a, b, c)]
    N_f = int(sum(nz))
    eps = defect_bound(chart)
    return ValidationValues(eps_tol=eps, R_prime=Rp, R=R, mu_star=mu, K1=K1, K2=K2, N_f=N_f)


def validate_tail(chart: TaylorChart, vv: ValidationValues, k: int = AMBIENT_DIM,
                  store=True) -> TailCertificate:
    """Check the three a-posteriori inequalities and choose delta just above c2."""
    N = chart.order
    K1 = Interval.point(vv.K1)
    mu = Interval.point(vv.mu_star)
    lnK1 = K1.log()
    lnmu = mu.log()
    bound = (-lnK1) / lnmu
    if not (N + 1) > bound.hi:
        raise OrderTooLow(f"N+1 = {N + 1} does not exceed {float(bound.hi)!r}")
    muN = mu ** (N + 1)
    gap = 1.0 - K1 * muN
    if not gap.lo > 0:
        raise OrderTooLow("1 - K1 mu*^(N+1) is not positive")
    pi = Interval.from_value(math.pi).inflate(1.0, 1e-15)
    first = gap / (2.0 * k * pi * vv.N_f * K1 * Interval.point(vv.K2)) if vv.N_f > 0 else None
    RmR = Interval.point(vv.R) - Interval.point(vv.R_prime)
    e_inv = Interval.from_value(-1.0).exp()
    cands = [RmR.lo] if first is None else [first.lo, RmR.lo]
    c1 = float(dn((e_inv * Interval.point(float(min(cands)))).lo))
    c2 = float((2.0 * K1 * Interval.point(vv.eps_tol) / gap).hi)
    delta = float(up(max(c2 * (1.0 + 1e-6), 1e-300)))
    if not (c2 < delta < c1):
        raise WindowEmpty(f"no admissible delta: c2 = {c2!r}, c1 = {c1!r}", c1=c1, c2=c2)
    cert = TailCertificate(delta=delta, order=N, c1=c1, c2=c2, order_bound=float(bound.hi))
    if store:
        chart.tail_delta = delta
        chart.validation = vv
        chart.tail = cert
    return cert


def build_chart(fp: FixedPointData, params: LomeliParams, order: int, scaling: float,
                target_delta: float = 1e-10, shrink: float = 0.9, max_tries: int = 60,
                sigma: float = 0.05, lmap: LomeliMap | None = None) -> TaylorChart:
    """Solve, then sweep the eigenvector length down until the tail certifies."""
    kind = STABLE if fp.stability == "stable_pair" else UNSTABLE
    base = solve_homological(fp, order, scaling, params, kind=kind, lmap=lmap)
    base.sigma = sigma
    chart = base
    last_err = None
    for i in range(max_tries):
        try:
            vv = validation_values(chart)
            cert = validate_tail(chart, vv)
            if cert.delta < target_delta:
                return chart
            last_err = WindowEmpty(f"delta {cert.delta!r} above target", c1=cert.c1, c2=cert.c2)
        except (WindowEmpty, OrderTooLow) as exc:
            last_err = exc
        chart = rescale(base, shrink ** (i + 1))
        chart.sigma = sigma
    raise last_err


def chart_eval(chart: TaylorChart, s, t, sigma: float | None = None):
    """Value (3,) and derivative (3, 2) enclosures of the certified chart at ``(s, t)``."""
    if sigma is not None and sigma != chart.sigma:
        chart.sigma = sigma
        chart._eval_cache.pop("C", None)
    return chart.eval(s, t)


def chart_from_json(data: dict, params: LomeliParams, fp: FixedPointData) -> TaylorChart:
    N = int(data["order"])
    re_lo = np.zeros((3, N + 1, N + 1))
    re_hi = np.zeros((3, N + 1, N + 1))
    im_lo = np.zeros((3, N + 1, N + 1))
    im_hi = np.zeros((3, N + 1, N + 1))
    for k, l, re, im in data["coefficients"]:
        r = Interval.from_json(re)
        q = Interval.from_json(im)
        re_lo[:, k, l], re_hi[:, k, l] = r.lo, r.hi
        im_lo[:, k, l], im_hi[:, k, l] = q.lo, q.hi
    P = ComplexInterval(Interval(re_lo, re_hi), Interval(im_lo, im_hi))
    chart = TaylorChart(coeffs=P, order=N, eig=ComplexInterval.from_json(data["eigenvalue"]),
                        kind=data["kind"], scaling=float(data["scaling"]), fixed_point=fp,
                        params=params, sigma=float(data["sigma"]),
                        base_scaling=float(data.get("base_scaling", data["scaling"])),
                        rescales=tuple(float(f) for f in data.get("rescales", [])))
    chart.real_coeffs = real_chart_coeffs(P, N)
    if data.get("delta") is not None:
        chart.tail_delta = float(data["delta"])
    return chart
