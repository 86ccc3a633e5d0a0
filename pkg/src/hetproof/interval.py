"""Outward-rounded interval arithmetic on numpy arrays.

Every operation first computes the correctly rounded IEEE result and then
moves the endpoints with ``np.nextafter``.  Addition and subtraction use an
error-free transformation (TwoSum) so that exact results stay exact;
the remaining operations widen by one ulp unconditionally.

An :class:`Interval` holds two float64 arrays of identical shape, so a single
object may be a scalar, a vector, a matrix or a batch of any of those.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import (
    DivisionByIntervalContainingZero,
    EmptyIntersection,
    NegativeSqrtDomain,
    ShapeMismatch,
    SingularEnclosure,
)

_INF = np.inf
U = 2.0 ** -53


def dn(x):
    return np.nextafter(x, -_INF)


def up(x):
    return np.nextafter(x, _INF)


def gamma(n: int) -> float:
    """Upper bound of n*u/(1-n*u) as a float."""
    if n <= 0:
        return 0.0
    g = n * U / (1.0 - n * U)
    return float(up(up(g)))


def _two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def add_dn(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        s, e = _two_sum(a, b)
        out = np.where(e < 0, dn(s), s)
        bad = ~np.isfinite(e)
    if np.any(bad):
        out = np.where(bad, dn(s), out)
    return out


def add_up(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        s, e = _two_sum(a, b)
        out = np.where(e > 0, up(s), s)
        bad = ~np.isfinite(e)
    if np.any(bad):
        out = np.where(bad, up(s), out)
    return out


def _f64(x):
    return np.asarray(x, dtype=np.float64)


def _outward_from_fraction(q: Fraction):
    f = float(q)
    fq = Fraction(f)
    if fq == q:
        return f, f
    if fq > q:
        return float(dn(f)), f
    return f, float(up(f))


class Interval:
    """Array of closed real intervals ``[lo, hi]``."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None, check=True):
        lo = np.array(lo, dtype=np.float64)
        hi = lo.copy() if hi is None else np.array(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
            lo, hi = lo.copy(), hi.copy()
        if check and not np.all(lo <= hi):
            raise ValueError("interval with lo > hi or NaN endpoint")
        self.lo = lo
        self.hi = hi

    # construction -----------------------------------------------------
    @classmethod
    def _raw(cls, lo, hi):
        obj = cls.__new__(cls)
        obj.lo = lo
        obj.hi = hi
        return obj

    @classmethod
    def point(cls, x):
        x = np.array(x, dtype=np.float64)
        return cls._raw(x, x.copy())

    @classmethod
    def from_value(cls, v):
        """Enclosure of an exact number given as str, Fraction, int or float."""
        if isinstance(v, Interval):
            return v
        if isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool):
            return cls.point(float(v))
        if isinstance(v, str):
            q = Fraction(v.strip())
        else:
            q = Fraction(v)
        lo, hi = _outward_from_fraction(q)
        return cls(lo, hi)

    @classmethod
    def zeros(cls, shape):
        return cls._raw(np.zeros(shape), np.zeros(shape))

    @classmethod
    def hull_of(cls, a, b):
        a = as_interval(a)
        b = as_interval(b)
        return cls._raw(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))

    # array protocol -----------------------------------------------------
    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    @property
    def size(self):
        return self.lo.size

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx):
        return Interval._raw(self.lo[idx], self.hi[idx])

    def __setitem__(self, idx, val):
        val = as_interval(val)
        self.lo[idx] = val.lo
        self.hi[idx] = val.hi

    def copy(self):
        return Interval._raw(self.lo.copy(), self.hi.copy())

    def reshape(self, *shape):
        return Interval._raw(self.lo.reshape(*shape), self.hi.reshape(*shape))

    @property
    def T(self):
        return Interval._raw(self.lo.T, self.hi.T)

    def swapaxes(self, a, b):
        return Interval._raw(self.lo.swapaxes(a, b), self.hi.swapaxes(a, b))

    def transpose(self, *axes):
        return Interval._raw(self.lo.transpose(*axes), self.hi.transpose(*axes))

    def broadcast_to(self, shape):
        return Interval._raw(np.broadcast_to(self.lo, shape).copy(),
                             np.broadcast_to(self.hi, shape).copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    # summaries ----------------------------------------------------------
    def mid(self):
        with np.errstate(over="ignore", invalid="ignore"):
            m = 0.5 * self.lo + 0.5 * self.hi
        return np.clip(m, self.lo, self.hi)

    def rad(self):
        m = self.mid()
        return np.maximum(add_up(self.hi, -m), add_up(m, -self.lo))

    def width(self):
        return add_up(self.hi, -self.lo)

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        z = (self.lo <= 0) & (self.hi >= 0)
        return np.where(z, 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def is_finite(self):
        return np.isfinite(self.lo) & np.isfinite(self.hi)

    # set relations ------------------------------------------------------
    def contains(self, x):
        """Elementwise test that ``x`` (float array or Interval) lies in self."""
        if isinstance(x, Interval):
            return (self.lo <= x.lo) & (x.hi <= self.hi)
        x = _f64(x)
        return (self.lo <= x) & (x <= self.hi)

    def interior_contains(self, x):
        if isinstance(x, Interval):
            return (self.lo < x.lo) & (x.hi < self.hi)
        x = _f64(x)
        return (self.lo < x) & (x < self.hi)

    def overlaps(self, other):
        other = as_interval(other)
        return (self.lo <= other.hi) & (other.lo <= self.hi)

    def intersect(self, other):
        other = as_interval(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if not np.all(lo <= hi):
            raise EmptyIntersection("intervals do not intersect")
        return Interval._raw(lo, hi)

    def hull(self, other):
        return Interval.hull_of(self, other)

    def inflate(self, factor=1.0, floor=0.0):
        """Scale the radius about the midpoint by ``factor`` and add ``floor``."""
        m = self.mid()
        r = self.rad() * factor + floor
        r = up(r)
        return Interval._raw(add_dn(m, -r), add_up(m, r))

    # arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval._raw(add_dn(self.lo, other.lo), add_up(self.hi, other.hi))
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _f64(other)
        return Interval._raw(add_dn(self.lo, o), add_up(self.hi, o))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval._raw(add_dn(self.lo, -other.hi), add_up(self.hi, -other.lo))
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _f64(other)
        return Interval._raw(add_dn(self.lo, -o), add_up(self.hi, -o))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Interval):
            return _mul(self.lo, self.hi, other.lo, other.hi)
        if isinstance(other, ComplexInterval):
            return NotImplemented
        o = _f64(other)
        with np.errstate(invalid="ignore"):
            p = self.lo * o
            q = self.hi * o
        return Interval._raw(dn(np.minimum(p, q)), up(np.maximum(p, q)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_interval(other)
        if np.any((other.lo <= 0) & (other.hi >= 0)):
            raise DivisionByIntervalContainingZero("denominator contains zero")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        with np.errstate(over="ignore", under="ignore"):
            q = np.stack(np.broadcast_arrays(a / c, a / d, b / c, b / d))
        return Interval._raw(dn(q.min(0)), up(q.max(0)))

    def __rtruediv__(self, other):
        return as_interval(other) / self

    def sqr(self):
        lo2 = self.lo * self.lo
        hi2 = self.hi * self.hi
        z = (self.lo <= 0) & (self.hi >= 0)
        lo = np.where(z, 0.0, dn(np.minimum(lo2, hi2)))
        return Interval._raw(np.maximum(lo, 0.0), up(np.maximum(lo2, hi2)))

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers")
        return self.powers(int(n))[..., int(n)]

    def powers(self, n):
        """Stack of ``self**k`` for k = 0..n along a new last axis (tight for each k)."""
        lo, hi = self.lo, self.hi
        shape = lo.shape + (n + 1,)
        plo = np.empty(shape)
        phi = np.empty(shape)
        plo[..., 0] = 1.0
        phi[..., 0] = 1.0
        if n == 0:
            return Interval._raw(plo, phi)
        alo = np.abs(lo)
        ahi = np.abs(hi)
        # powers of the endpoint magnitudes, rounded down and up
        ld = np.ones_like(lo)
        lu = np.ones_like(lo)
        hd = np.ones_like(lo)
        hu = np.ones_like(lo)
        pos = lo >= 0
        neg = hi <= 0
        with np.errstate(invalid="ignore", over="ignore"):
            for k in range(1, n + 1):
                ld = _dir_prod(ld, alo, -1)
                lu = _dir_prod(lu, alo, 1)
                hd = _dir_prod(hd, ahi, -1)
                hu = _dir_prod(hu, ahi, 1)
                plo[..., k], phi[..., k] = _power_bounds(k, ld, lu, hd, hu, pos, neg)
        return Interval._raw(plo, phi)

    def sqrt(self):
        if np.any(self.lo < 0):
            raise NegativeSqrtDomain("sqrt of interval with negative part")
        return Interval._raw(_sqrt_dn(self.lo), _sqrt_up(self.hi))

    def __abs__(self):
        lo = self.mig()
        return Interval._raw(lo, self.mag())

    def exp(self):
        # libm exp is faithful to well under one ulp; two ulps of margin per side
        return Interval._raw(dn(dn(np.exp(self.lo))), up(up(np.exp(self.hi))))

    def log(self):
        if np.any(self.lo <= 0):
            raise ValueError("log of non-positive interval")
        return Interval._raw(dn(dn(np.log(self.lo))), up(up(np.log(self.hi))))

    # reductions ---------------------------------------------------------
    def sum(self, axis=None):
        if axis is None:
            return self.reshape(-1).sum(0)
        axis = axis % self.ndim
        n = self.shape[axis]
        if n == 0:
            shp = self.shape[:axis] + self.shape[axis + 1:]
            return Interval.zeros(shp)
        if n <= 6:
            lo = np.take(self.lo, 0, axis=axis)
            hi = np.take(self.hi, 0, axis=axis)
            for i in range(1, n):
                lo = add_dn(lo, np.take(self.lo, i, axis=axis))
                hi = add_up(hi, np.take(self.hi, i, axis=axis))
            return Interval._raw(lo, hi)
        c = gamma(n)
        c = float(up(c / (1.0 - c)))
        slo = np.sum(self.lo, axis=axis)
        shi = np.sum(self.hi, axis=axis)
        elo = up(np.sum(np.abs(self.lo), axis=axis) * c)
        ehi = up(np.sum(np.abs(self.hi), axis=axis) * c)
        return Interval._raw(dn(slo - elo), up(shi + ehi))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    # comparisons used for diagnostics -------------------------------------
    def __repr__(self):
        if self.ndim == 0:
            return f"Interval([{float(self.lo)!r}, {float(self.hi)!r}])"
        return f"Interval(shape={self.shape}, lo={self.lo!r}, hi={self.hi!r})"

    # serialization ------------------------------------------------------
    def to_json(self):
        """Nested lists of ``[lo, hi]`` decimal strings that parse back outward."""
        return _to_json_rec(self.lo, self.hi)

    @classmethod
    def from_json(cls, data):
        arr = np.array(data, dtype=object)
        if arr.ndim == 1 and arr.shape == (2,) and isinstance(arr[0], str):
            lo, hi = _parse_lo(arr[0]), _parse_hi(arr[1])
            return cls(lo, hi)
        flat = arr.reshape(-1, 2)
        lo = np.array([_parse_lo(s) for s in flat[:, 0]])
        hi = np.array([_parse_hi(s) for s in flat[:, 1]])
        shape = arr.shape[:-1]
        return cls(lo.reshape(shape), hi.reshape(shape))


def _to_json_rec(lo, hi):
    if lo.ndim == 0:
        return [_fmt_lo(float(lo)), _fmt_hi(float(hi))]
    return [_to_json_rec(lo[i], hi[i]) for i in range(lo.shape[0])]


def _fmt_lo(x: float) -> str:
    # shortest round-trip decimal; read back as exactly this double
    return repr(float(x))


_fmt_hi = _fmt_lo


def _exact_double(s: str):
    """The double ``s`` denotes when ``s`` is its canonical repr, else None."""
    try:
        v = float(s)
    except ValueError:
        return None
    return v if repr(v) == s else None


def _parse_lo(s: str) -> float:
    v = _exact_double(s)
    if v is not None:
        return v
    return _outward_from_fraction(Fraction(s))[0]


def _parse_hi(s: str) -> float:
    v = _exact_double(s)
    if v is not None:
        return v
    return _outward_from_fraction(Fraction(s))[1]


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    """Dekker product: p + e == a*b exactly (no overflow assumed)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _sqrt_dn(x):
    s = np.sqrt(x)
    p, e = _two_prod(s, s)
    too_big = (p > x) | ((p == x) & (e > 0))
    return np.where(too_big, np.maximum(dn(s), 0.0), s)


def _sqrt_up(x):
    s = np.sqrt(x)
    p, e = _two_prod(s, s)
    too_small = (p < x) | ((p == x) & (e < 0))
    return np.where(too_small, up(s), s)


def _mul(a, b, c, d):
    with np.errstate(invalid="ignore", over="ignore"):
        a, b, c, d = np.broadcast_arrays(a, b, c, d)
        x = np.stack((a, a, b, b))
        y = np.stack((c, d, c, d))
        p = x * y
        i = np.argmin(p, axis=0)[None]
        j = np.argmax(p, axis=0)[None]
        lo = _dir_prod(np.take_along_axis(x, i, 0)[0], np.take_along_axis(y, i, 0)[0], -1)
        hi = _dir_prod(np.take_along_axis(x, j, 0)[0], np.take_along_axis(y, j, 0)[0], 1)
    return Interval._raw(lo, hi)


def mul_loose(x: Interval, y: Interval) -> Interval:
    """Product widened by one ulp without the exactness test (bulk use)."""
    with np.errstate(invalid="ignore", over="ignore"):
        p1 = x.lo * y.lo
        p2 = x.lo * y.hi
        p3 = x.hi * y.lo
        p4 = x.hi * y.hi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return Interval._raw(dn(lo), up(hi))


def _power_bounds(k, ld, lu, hd, hu, pos, neg):
    """Bounds of ``x**k`` from directed powers of the endpoint magnitudes."""
    if k % 2 == 0:
        # even power: monotone in |x|
        mlo = np.where(pos, ld, np.where(neg, hd, 0.0))
        mhi = np.where(pos, hu, np.where(neg, lu, np.maximum(lu, hu)))
    else:
        # odd power: monotone increasing, sign carried through
        mlo = np.where(pos, ld, -lu)
        mhi = np.where(neg, -hd, hu)
    return mlo, mhi


def _dir_prod(x, y, direction):
    """Product rounded toward -inf (direction -1) or +inf (direction 1)."""
    p, e = _two_prod(x, y)
    ok = np.isfinite(e) & (np.abs(p) < 1e300) & (np.abs(p) > 1e-290)
    exact_side = (e >= 0) if direction < 0 else (e <= 0)
    nudged = dn(p) if direction < 0 else up(p)
    zero = (x == 0) | (y == 0)
    return np.where(zero, 0.0, np.where(ok & exact_side, p, nudged))


def as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (str, Fraction)):
        return Interval.from_value(x)
    return Interval.point(x)


def stack(items, axis=0) -> Interval:
    items = [as_interval(i) for i in items]
    return Interval._raw(np.stack([i.lo for i in items], axis), np.stack([i.hi for i in items], axis))


def concatenate(items, axis=0) -> Interval:
    items = [as_interval(i) for i in items]
    return Interval._raw(np.concatenate([i.lo for i in items], axis),
                         np.concatenate([i.hi for i in items], axis))


def where(cond, a, b) -> Interval:
    a = as_interval(a)
    b = as_interval(b)
    return Interval._raw(np.where(cond, a.lo, b.lo), np.where(cond, a.hi, b.hi))


def midrad(m, r) -> Interval:
    """Interval ``m ± r`` with outward rounding."""
    m = _f64(m)
    r = _f64(r)
    return Interval._raw(add_dn(m, -r), add_up(m, r))


def to_midrad(x: Interval):
    return x.mid(), x.rad()


# ----------------------------------------------------------------------------
# matrix operations
# ----------------------------------------------------------------------------

def matmul(A, B):
    """Interval enclosure of ``A @ B`` with numpy batching semantics.

    Either operand may be an Interval or a float array.  Vectors are treated
    as in ``np.matmul``.
    """
    Ai = isinstance(A, Interval)
    Bi = isinstance(B, Interval)
    if not Ai and not Bi:
        raise TypeError("at least one interval operand expected")
    ash = A.shape
    bsh = B.shape
    avec = len(ash) == 1
    bvec = len(bsh) == 1
    if avec:
        A = A.reshape(1, -1) if Ai else _f64(A).reshape(1, -1)
    if bvec:
        B = B.reshape(-1, 1) if Bi else _f64(B).reshape(-1, 1)
    if A.shape[-1] != B.shape[-2]:
        raise ShapeMismatch(f"cannot multiply shapes {ash} and {bsh}")
    a = A[..., :, :, None]
    b = B[..., None, :, :]
    prod = a * b if Ai else b * _f64(a)
    out = prod.sum(axis=-2)
    if avec:
        out = out[..., 0, :]
    if bvec:
        out = out[..., 0]
    return out


def midrad_matmul(Am, Ar, Bm, Br=None) -> Interval:
    """Enclosure of ``[Am ± Ar] @ [Bm ± Br]`` through float matrix products.

    Uses the midpoint-radius bound
    ``|AB - Am Bm| <= |Am| Br + Ar (|Bm| + Br)`` plus the rounding error of
    the float products, so large products cost a handful of BLAS calls.
    """
    Am = _f64(Am)
    Bm = _f64(Bm)
    k = Am.shape[-1]
    g = gamma(k + 2)
    C = Am @ Bm
    aAm = np.abs(Am)
    aBm = np.abs(Bm)
    err = aAm @ aBm
    rad = np.zeros_like(C)
    if Br is not None:
        Br = _f64(Br)
        rad = aAm @ Br
        if Ar is not None:
            rad = rad + _f64(Ar) @ (aBm + Br)
    elif Ar is not None:
        rad = _f64(Ar) @ aBm
    # all three matrix sums carry relative error <= gamma(k); the factor 3 covers
    # the float additions below
    total = up(up(rad * (1.0 + 3 * g)) + up(err * (3 * g)))
    total = up(total + np.finfo(float).tiny * k)
    return Interval._raw(dn(C - total), up(C + total))


def norm_inf(A) -> float | np.ndarray:
    """Upper bound of the induced infinity norm of every member of ``A``."""
    A = as_interval(A)
    mags = A.mag()
    s = mags[..., 0]
    for j in range(1, mags.shape[-1]):
        s = add_up(s, mags[..., j])
    return np.max(s, axis=-1)


def contains(inner, outer, strict=True):
    """True iff ``inner`` lies componentwise in ``outer`` (open interior if strict)."""
    inner = as_interval(inner)
    outer = as_interval(outer)
    if inner.shape != outer.shape:
        raise ShapeMismatch(f"{inner.shape} vs {outer.shape}")
    if strict:
        return bool(np.all(outer.interior_contains(inner)))
    return bool(np.all(outer.contains(inner)))


def eye(n, batch=()):
    e = np.broadcast_to(np.eye(n), tuple(batch) + (n, n)).copy()
    return Interval.point(e)


def solve_batch(A: Interval, b: Interval, iterations: int = 2):
    """Batched enclosure of ``{M^{-1} v : M in A, v in b}``.

    Krawczyk-type bound with the midpoint inverse ``C`` as preconditioner:
    with ``G = I - C A`` and ``||G|| <= beta < 1`` every member is invertible
    and every solution satisfies ``x in C b + G x``.

    Returns ``(x, ok)`` where ``ok`` flags the batch members for which the
    contraction was verified; entries of ``x`` with ``ok`` False are
    meaningless.
    """
    A = as_interval(A)
    b = as_interval(b)
    vec = b.ndim == A.ndim - 1
    if vec:
        b = b[..., None]
    n = A.shape[-1]
    if A.shape[-2] != n or b.shape[-2] != n:
        raise ShapeMismatch(f"cannot solve {A.shape} with {b.shape}")
    Am = A.mid()
    with np.errstate(all="ignore"):
        try:
            C = np.linalg.inv(Am)
        except np.linalg.LinAlgError:
            C = np.stack([_safe_inv(m) for m in Am.reshape(-1, n, n)]).reshape(Am.shape)
    finite = np.all(np.isfinite(C), axis=(-2, -1))
    C = np.where(finite[..., None, None], C, 0.0)
    G = eye(n, A.shape[:-2]) - matmul(C, A)
    beta = norm_inf(G)
    z = matmul(C, b)
    zmag = np.max(z.mag(), axis=-2)
    ok = finite & (beta < 1.0)
    with np.errstate(all="ignore"):
        denom = np.where(ok, dn(1.0 - beta), 1.0)
        rho = up(zmag / denom[..., None])
    rho = np.where(ok[..., None], rho, 0.0)
    x = Interval._raw(np.broadcast_to(-rho[..., None, :], z.shape).copy(),
                      np.broadcast_to(rho[..., None, :], z.shape).copy())
    for _ in range(iterations):
        xn = z + matmul(G, x)
        lo = np.maximum(xn.lo, x.lo)
        hi = np.minimum(xn.hi, x.hi)
        x = Interval._raw(np.where(lo <= hi, lo, x.lo), np.where(lo <= hi, hi, x.hi))
    if vec:
        x = x[..., 0]
    return x, ok


def _safe_inv(m):
    try:
        return np.linalg.inv(m)
    except np.linalg.LinAlgError:
        return np.full_like(m, np.nan)


def solve(A, b):
    """Enclosure of ``{M^{-1} v}``; raises SingularEnclosure on failure."""
    x, ok = solve_batch(A, b)
    if not np.all(ok):
        raise SingularEnclosure("could not verify invertibility of the interval matrix")
    return x


# ----------------------------------------------------------------------------
# complex intervals
# ----------------------------------------------------------------------------

class ComplexInterval:
    """Rectangular complex interval ``re + i*im``."""

    __slots__ = ("re", "im")
    __array_priority__ = 1001

    def __init__(self, re, im=None):
        self.re = as_interval(re)
        self.im = Interval.zeros(self.re.shape) if im is None else as_interval(im)
        if self.re.shape != self.im.shape:
            raise ShapeMismatch("real and imaginary parts differ in shape")

    @classmethod
    def point(cls, z):
        z = np.asarray(z, dtype=np.complex128)
        return cls(Interval.point(z.real.copy()), Interval.point(z.imag.copy()))

    @classmethod
    def zeros(cls, shape):
        return cls(Interval.zeros(shape), Interval.zeros(shape))

    @property
    def shape(self):
        return self.re.shape

    @property
    def ndim(self):
        return self.re.ndim

    def __len__(self):
        return len(self.re)

    def __getitem__(self, idx):
        return ComplexInterval(self.re[idx], self.im[idx])

    def __setitem__(self, idx, val):
        val = as_complex_interval(val)
        self.re[idx] = val.re
        self.im[idx] = val.im

    def copy(self):
        return ComplexInterval(self.re.copy(), self.im.copy())

    def reshape(self, *shape):
        return ComplexInterval(self.re.reshape(*shape), self.im.reshape(*shape))

    def mid(self):
        return self.re.mid() + 1j * self.im.mid()

    def mag(self):
        """Upper bound of the modulus."""
        return up(np.hypot(self.re.mag(), self.im.mag()) * (1.0 + 4 * U))

    def abs(self) -> Interval:
        return (self.re.sqr() + self.im.sqr()).sqrt()

    def abs2(self) -> Interval:
        return self.re.sqr() + self.im.sqr()

    def conj(self):
        return ComplexInterval(self.re, -self.im)

    def contains(self, z):
        if isinstance(z, ComplexInterval):
            return self.re.contains(z.re) & self.im.contains(z.im)
        z = np.asarray(z, dtype=np.complex128)
        return self.re.contains(z.real) & self.im.contains(z.imag)

    def interior_contains(self, z):
        if isinstance(z, ComplexInterval):
            return self.re.interior_contains(z.re) & self.im.interior_contains(z.im)
        z = np.asarray(z, dtype=np.complex128)
        return self.re.interior_contains(z.real) & self.im.interior_contains(z.imag)

    def intersect(self, other):
        other = as_complex_interval(other)
        return ComplexInterval(self.re.intersect(other.re), self.im.intersect(other.im))

    def hull(self, other):
        other = as_complex_interval(other)
        return ComplexInterval(self.re.hull(other.re), self.im.hull(other.im))

    def __neg__(self):
        return ComplexInterval(-self.re, -self.im)

    def __add__(self, other):
        other = as_complex_interval(other)
        return ComplexInterval(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_complex_interval(other)
        return ComplexInterval(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_complex_interval(other) - self

    def __mul__(self, other):
        if isinstance(other, Interval) or (not isinstance(other, ComplexInterval)
                                          and not np.iscomplexobj(other)
                                          and not isinstance(other, complex)):
            o = as_interval(other)
            return ComplexInterval(self.re * o, self.im * o)
        o = as_complex_interval(other)
        re = self.re * o.re - self.im * o.im
        im = self.re * o.im + self.im * o.re
        return ComplexInterval(re, im)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_complex_interval(other)
        d = o.abs2()
        num = self * o.conj()
        return ComplexInterval(num.re / d, num.im / d)

    def __rtruediv__(self, other):
        return as_complex_interval(other) / self

    def sum(self, axis=None):
        return ComplexInterval(self.re.sum(axis), self.im.sum(axis))

    def to_json(self):
        return {"re": self.re.to_json(), "im": self.im.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(Interval.from_json(data["re"]), Interval.from_json(data["im"]))

    def __repr__(self):
        return f"ComplexInterval(re={self.re!r}, im={self.im!r})"


def as_complex_interval(x) -> ComplexInterval:
    if isinstance(x, ComplexInterval):
        return x
    if isinstance(x, Interval):
        return ComplexInterval(x, Interval.zeros(x.shape))
    return ComplexInterval.point(x)


def cstack(items, axis=0) -> ComplexInterval:
    items = [as_complex_interval(i) for i in items]
    return ComplexInterval(stack([i.re for i in items], axis), stack([i.im for i in items], axis))


def exp_neg(sigma: float) -> Interval:
    """Enclosure of ``exp(-sigma)``."""
    return (-Interval.from_value(sigma)).exp()


def log_ub(x: float) -> float:
    return float(up(up(math.log(x))))


def group_sum(x: Interval, groups, n_groups: int) -> Interval:
    """Rigorous sums of ``x`` over the index groups ``groups`` (1-D)."""
    groups = np.asarray(groups)
    cnt = np.bincount(groups, minlength=n_groups)
    g = np.array([gamma(int(c)) for c in range(int(cnt.max()) + 1)]) if cnt.size else np.zeros(1)
    c = up(g[cnt] / (1.0 - g[cnt]))
    slo = np.bincount(groups, weights=x.lo, minlength=n_groups)
    shi = np.bincount(groups, weights=x.hi, minlength=n_groups)
    elo = up(np.bincount(groups, weights=np.abs(x.lo), minlength=n_groups) * c)
    ehi = up(np.bincount(groups, weights=np.abs(x.hi), minlength=n_groups) * c)
    return Interval._raw(dn(slo - elo), up(shi + ehi))


def conv2_midrad(xm, xr, ym, yr):
    """Enclosure of the 2-D full convolution of ``[xm ± xr]`` and ``[ym ± yr]``.

    Real float arrays in, Interval out.  ``scipy.signal.convolve2d`` sums
    directly, so the classical gamma bound applies to every output entry.
    """
    from scipy.signal import convolve2d

    k = xm.size
    g = gamma(k + 2)
    mid = convolve2d(xm, ym)
    axm = np.abs(xm)
    aym = np.abs(ym)
    err = convolve2d(axm, aym)
    rad = convolve2d(axm, yr) + convolve2d(xr, aym + yr)
    total = up(up(rad * (1.0 + 3 * g)) + up(err * (3 * g)))
    total = up(total + np.finfo(float).tiny * k)
    return Interval._raw(dn(mid - total), up(mid + total))


def cconv2(X: ComplexInterval, Y: ComplexInterval) -> ComplexInterval:
    """Full 2-D convolution (Cauchy product of bivariate series) of complex intervals."""
    xr_m, xr_r = X.re.mid(), X.re.rad()
    xi_m, xi_r = X.im.mid(), X.im.rad()
    yr_m, yr_r = Y.re.mid(), Y.re.rad()
    yi_m, yi_r = Y.im.mid(), Y.im.rad()
    rr = conv2_midrad(xr_m, xr_r, yr_m, yr_r)
    ii = conv2_midrad(xi_m, xi_r, yi_m, yi_r)
    ri = conv2_midrad(xr_m, xr_r, yi_m, yi_r)
    ir = conv2_midrad(xi_m, xi_r, yr_m, yr_r)
    return ComplexInterval(rr - ii, ri + ir)
