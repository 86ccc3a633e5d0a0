"""The Lomelí family of quadratic volume-preserving maps of R^3.

    f(x, y, z) = (z + alpha + tau*x + a*x^2 + b*x*y + c*y^2, x, y)

with the quadratic inverse

    f^{-1}(x, y, z) = (y, z, x - alpha - tau*y - a*y^2 - b*y*z - c*z^2).

All evaluators accept either an :class:`Interval` of shape ``(..., 3)`` or a
plain float array of the same shape; the latter uses midpoint parameters and
is the floating twin used for seed finding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ComplexFixedPoints,
    EigenvalueVerificationFailed,
    HyperbolicityMarginTooSmall,
    InclusionFailed,
)
from .interval import ComplexInterval, Interval, as_interval, solve_batch, stack

FORWARD = 1
INVERSE = -1


@dataclass(frozen=True)
class LomeliParams:
    a: Interval
    b: Interval
    c: Interval
    alpha: Interval
    tau: Interval
    source: tuple = ()

    @classmethod
    def from_values(cls, a, b, c, alpha, tau, check_normalized=True):
        """Build from exact strings (``"44/100"``, ``"-0.08999"``), Fractions or floats."""
        vals = [Interval.from_value(v) for v in (a, b, c, alpha, tau)]
        src = tuple(str(v) for v in (a, b, c, alpha, tau))
        p = cls(*vals, source=src)
        if check_normalized and not bool(p.abc_sum().contains(1.0)):
            raise ValueError("parameters violate a + b + c = 1")
        return p

    @classmethod
    def from_dict(cls, d, check_normalized=True):
        return cls.from_values(d["a"], d["b"], d["c"], d["alpha"], d["tau"],
                               check_normalized=check_normalized)

    def to_dict(self):
        if self.source:
            return dict(zip(("a", "b", "c", "alpha", "tau"), self.source))
        return {k: repr(float(getattr(self, k).mid())) for k in ("a", "b", "c", "alpha", "tau")}

    def abc_sum(self) -> Interval:
        return self.a + self.b + self.c

    def floats(self):
        return tuple(float(getattr(self, k).mid()) for k in ("a", "b", "c", "alpha", "tau"))


class QuadraticMap:
    """Interface of a quadratic diffeomorphism of R^n with quadratic inverse.

    Implementations provide the map, its Jacobian and the constant Hessian
    sequence in both directions.
    """

    dim = 3

    def apply(self, p, direction=FORWARD):
        raise NotImplementedError

    def jacobian(self, p, direction=FORWARD):
        raise NotImplementedError

    def hessians(self, direction=FORWARD) -> Interval:
        raise NotImplementedError

    def iterate(self, p, k):
        d = FORWARD if k >= 0 else INVERSE
        for _ in range(abs(k)):
            p = self.apply(p, d)
        return p


class LomeliMap(QuadraticMap):
    def __init__(self, params: LomeliParams):
        self.params = params
        self._fp = params.floats()

    def _coeffs(self, p):
        if isinstance(p, Interval):
            P = self.params
            return P.a, P.b, P.c, P.alpha, P.tau
        return self._fp

    def apply(self, p, direction=FORWARD):
        a, b, c, al, tau = self._coeffs(p)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        if isinstance(p, Interval):
            if direction == FORWARD:
                top = z + al + tau * x + a * x.sqr() + b * (x * y) + c * y.sqr()
                return stack([top, x, y], -1)
            bot = x - al - tau * y - a * y.sqr() - b * (y * z) - c * z.sqr()
            return stack([y, z, bot], -1)
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        if direction == FORWARD:
            return np.stack([z + al + tau * x + a * x * x + b * x * y + c * y * y, x, y], -1)
        return np.stack([y, z, x - al - tau * y - a * y * y - b * y * z - c * z * z], -1)

    def jacobian(self, p, direction=FORWARD):
        a, b, c, al, tau = self._coeffs(p)
        if isinstance(p, Interval):
            x, y, z = p[..., 0], p[..., 1], p[..., 2]
            shp = x.shape
            one = Interval.point(np.ones(shp))
            zero = Interval.zeros(shp)
            if direction == FORWARD:
                r1 = tau + 2.0 * (a * x) + b * y
                r2 = b * x + 2.0 * (c * y)
                rows = [[r1, r2, one], [one, zero, zero], [zero, one, zero]]
            else:
                q2 = -tau - 2.0 * (a * y) - b * z
                q3 = -(b * y) - 2.0 * (c * z)
                rows = [[zero, one, zero], [zero, zero, one], [one, q2, q3]]
            return stack([stack(r, -1) for r in rows], -2)
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        one = np.ones_like(x)
        zero = np.zeros_like(x)
        if direction == FORWARD:
            rows = [[tau + 2 * a * x + b * y, b * x + 2 * c * y, one], [one, zero, zero], [zero, one, zero]]
        else:
            rows = [[zero, one, zero], [zero, zero, one], [one, -tau - 2 * a * y - b * z, -b * y - 2 * c * z]]
        return np.stack([np.stack(r, -1) for r in rows], -2)

    def hessians(self, direction=FORWARD) -> Interval:
        """Constant Hessians ``H[i] = D^2 f_i`` as an Interval of shape (3, 3, 3)."""
        P = self.params
        H = Interval.zeros((3, 3, 3))
        if direction == FORWARD:
            H[0, 0, 0] = 2.0 * P.a
            H[0, 0, 1] = P.b
            H[0, 1, 0] = P.b
            H[0, 1, 1] = 2.0 * P.c
        else:
            H[2, 1, 1] = -(2.0 * P.a)
            H[2, 1, 2] = -P.b
            H[2, 2, 1] = -P.b
            H[2, 2, 2] = -(2.0 * P.c)
        return H

    def hessians_float(self, direction=FORWARD):
        H = self.hessians(direction)
        return H.mid()


# ----------------------------------------------------------------------------
# fixed points and eigen-data
# ----------------------------------------------------------------------------

@dataclass
class FixedPointData:
    t: Interval
    point: Interval
    eigenvalue_pair: ComplexInterval
    real_eigenvalue: Interval
    eigvec_pair: ComplexInterval
    stability: str
    eigvec_scale: float

    @property
    def modulus(self) -> Interval:
        return self.eigenvalue_pair.abs()

    def to_json(self):
        return {
            "t": self.t.to_json(),
            "point": self.point.to_json(),
            "eigenvalue_pair": self.eigenvalue_pair.to_json(),
            "real_eigenvalue": self.real_eigenvalue.to_json(),
            "eigvec_pair": self.eigvec_pair.to_json(),
            "stability": self.stability,
            "eigvec_scale": repr(float(self.eigvec_scale)),
        }


def _newton_1d(g, dg, x0: float, rad0: float, max_iter=30):
    """Verified simple root of a scalar function near ``x0``.

    ``g`` and ``dg`` take and return Intervals.  Returns the Newton image,
    which lies strictly inside the last trial interval.
    """
    X = Interval(x0 - rad0, x0 + rad0)
    for _ in range(max_iter):
        m = float(X.mid())
        d = dg(X)
        if d.lo <= 0 <= d.hi:
            X = X.inflate(0.5)
            continue
        N = m - g(Interval.point(m)) / d
        if bool(X.interior_contains(N)):
            return N
        X = Interval.hull_of(X, N).inflate(1.1, 1e-15 * max(1.0, abs(m)))
    raise InclusionFailed("scalar interval Newton did not contract")


def fixed_points(params: LomeliParams, lmap: LomeliMap | None = None):
    """Both fixed points ``t(1,1,1)`` with verified eigen-data.

    Returned as ``(p1, p2)`` where ``p1`` carries the unstable complex pair
    and ``p2`` the stable one.
    """
    lmap = lmap or LomeliMap(params)
    s = params.abc_sum()
    disc = params.tau.sqr() - 4.0 * (s * params.alpha)
    if not disc.lo > 0:
        raise ComplexFixedPoints("discriminant enclosure not strictly positive")
    sq = disc.sqrt()
    ts = [(-params.tau + sq) / (2.0 * s), (-params.tau - sq) / (2.0 * s)]

    def g(t):
        return s * t.sqr() + params.tau * t + params.alpha

    def dg(t):
        return 2.0 * (s * t) + params.tau

    out = []
    for tq in ts:
        t0 = float(tq.mid())
        T = _newton_1d(g, dg, t0, 1e-12 * max(1.0, abs(t0)))
        T = T.intersect(tq)
        point = stack([T, T, T])
        res = lmap.apply(point) - point
        if not np.all(res.contains(0.0)):
            raise InclusionFailed("fixed point residual does not enclose zero")
        out.append(eigen_data(point, params, lmap, T))
    out.sort(key=lambda d: 0 if d.stability == "unstable_pair" else 1)
    if [d.stability for d in out] != ["unstable_pair", "stable_pair"]:
        raise HyperbolicityMarginTooSmall("expected one unstable and one stable complex pair")
    return tuple(out)


def _charpoly(z, r1, r2):
    """``z^3 - r1 z^2 - r2 z - 1`` in Horner form (complex or real intervals)."""
    return ((z - r1) * z - r2) * z - 1.0


def _charpoly_d(z, r1, r2):
    return (3.0 * z - 2.0 * r1) * z - r2


def eigen_data(point: Interval, params: LomeliParams, lmap: LomeliMap | None = None,
               t: Interval | None = None) -> FixedPointData:
    """Verified eigenvalues and eigenvector of ``Df`` at a fixed point enclosure.

    The Jacobian at a fixed point has companion structure with characteristic
    polynomial ``lambda^3 - r1 lambda^2 - r2 lambda - 1``.  The complex root is
    verified by interval Newton on the coupled real system for
    ``(Re lambda, Im lambda)``; the real root by scalar Newton.  The complex
    root with negative imaginary part is selected.
    """
    lmap = lmap or LomeliMap(params)
    J = lmap.jacobian(point)
    r1, r2 = J[0, 0], J[0, 1]
    roots = np.roots([1.0, -float(r1.mid()), -float(r2.mid()), -1.0])
    cplx = [z for z in roots if abs(z.imag) > 1e-12]
    real = [z.real for z in roots if abs(z.imag) <= 1e-12]
    if len(cplx) != 2 or len(real) != 1:
        raise EigenvalueVerificationFailed("characteristic polynomial lacks a complex pair")
    z0 = min(cplx, key=lambda z: z.imag)

    lam = _verify_complex_root(z0, r1, r2)
    lam_r = _newton_1d(lambda x: _charpoly(x, r1, r2), lambda x: _charpoly_d(x, r1, r2),
                       float(real[0]), 1e-12)

    prod = lam.abs2() * lam_r
    if not bool(prod.contains(1.0)):
        raise EigenvalueVerificationFailed("product of eigenvalues does not enclose det = 1")
    mod2 = lam.abs2()
    if mod2.hi < 1.0:
        stability = "stable_pair"
    elif mod2.lo > 1.0:
        stability = "unstable_pair"
    else:
        raise HyperbolicityMarginTooSmall("|lambda| enclosure touches 1")

    one = ComplexInterval.point(1.0 + 0j)
    vec = [lam * lam, lam, one]
    lm = complex(lam.mid())
    kappa = 1.0 / float(np.sqrt(abs(lm) ** 4 + abs(lm) ** 2 + 1.0))
    xi = ComplexInterval(stack([v.re for v in vec]), stack([v.im for v in vec])) * kappa
    _check_eigvec(J, lam, xi)
    if t is None:
        t = point[0]
    return FixedPointData(t=t, point=point, eigenvalue_pair=lam, real_eigenvalue=lam_r,
                          eigvec_pair=xi, stability=stability, eigvec_scale=kappa)


def _check_eigvec(J: Interval, lam: ComplexInterval, xi: ComplexInterval):
    Jc = ComplexInterval(J, Interval.zeros(J.shape))
    res = []
    for i in range(3):
        acc = lam * xi[i] * -1.0
        for j in range(3):
            acc = acc + Jc[i, j] * xi[j]
        res.append(acc)
    for r in res:
        if not (bool(r.re.contains(0.0)) and bool(r.im.contains(0.0))):
            raise EigenvalueVerificationFailed("eigenvector residual does not enclose zero")


def _verify_complex_root(z0: complex, r1: Interval, r2: Interval, max_iter=30) -> ComplexInterval:
    rad = 1e-12 * max(1.0, abs(z0))
    Z = ComplexInterval(Interval(z0.real - rad, z0.real + rad), Interval(z0.imag - rad, z0.imag + rad))
    for _ in range(max_iter):
        zm = Z.mid()
        zc = ComplexInterval.point(zm)
        g0 = _charpoly(zc, r1, r2)
        d = _charpoly_d(Z, r1, r2)
        Jm = stack([stack([d.re, -d.im]), stack([d.im, d.re])])
        rhs = stack([g0.re, g0.im])
        step, ok = solve_batch(Jm, rhs)
        if not bool(ok):
            Z = ComplexInterval(Z.re.inflate(0.5), Z.im.inflate(0.5))
            continue
        N = ComplexInterval(zm.real - step[0], zm.imag - step[1])
        if bool(Z.re.interior_contains(N.re)) and bool(Z.im.interior_contains(N.im)):
            return N
        Z = ComplexInterval(Z.re.hull(N.re).inflate(1.1, 1e-15), Z.im.hull(N.im).inflate(1.1, 1e-15))
    raise EigenvalueVerificationFailed("complex interval Newton did not contract")


def jacobian_taylor(lmap: LomeliMap, x0: Interval, h: np.ndarray, direction=FORWARD) -> Interval:
    """``Df(x0) + h^T H`` for thin ``h``: row i gains ``H_i h``."""
    J = lmap.jacobian(x0, direction)
    H = lmap.hessians(direction)
    return J + (H @ as_interval(np.asarray(h, float)))
