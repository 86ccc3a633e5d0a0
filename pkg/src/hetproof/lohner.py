"""Lohner-type propagation of sets and derivatives through f^k and f^{-k}.

Points are carried as ``x0 + A b + r`` and derivatives as
``X0 + b^T Aq + R`` with one shared parameter box ``b``; ``x0``, ``A``,
``X0`` and ``Aq`` are float arrays and only ``r``, ``R`` are intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._pykernels import _quad as _quad_form
from ._pykernels import step as _py_step
from .errors import OutsideShrunkDomain, ShapeMismatch
from .interval import Interval, concatenate, stack
from .lomeli import FORWARD, INVERSE, LomeliMap
from .manifold import TaylorChart


@dataclass
class LohnerSet:
    x0: np.ndarray
    A: np.ndarray
    b: Interval
    r: Interval

    def enclosure(self) -> Interval:
        return (Interval.point(self.A) @ self.b[..., None])[..., 0] + self.r + self.x0


@dataclass
class LohnerDerivative:
    X0: np.ndarray
    Aq: np.ndarray
    R: Interval

    def enclosure(self, b: Interval) -> Interval:
        bA = (b[..., None, None, :] @ Interval.point(self.Aq))[..., 0, :]
        return bA + self.R + self.X0


# ----------------------------------------------------------------------------
# Hessian-sequence algebra
# ----------------------------------------------------------------------------

def bT_A(b, Aq):
    """Matrix whose i-th row is ``b^T A_i``; ``Aq`` has shape (n, m, c)."""
    return (b[None, None, :] @ Aq)[:, 0, :]


def bT_A_b(b, Aq):
    """Vector of ``b^T A_i b``."""
    return (b[None, None, :] @ Aq @ b[None, :, None])[:, 0, 0]


def B_times(B, Aq):
    """Sequence ``(B A_1, ..., B A_n)``."""
    return B[None] @ Aq


def times_B(Aq, B):
    """Sequence ``(A_1 B, ..., A_n B)``."""
    return Aq @ B[None]


def B_star(B, Aq):
    """Sequence whose k-th entry is ``sum_i B_ki A_i``."""
    prod = B[:, :, None, None] * Aq[None]
    return prod.sum(axis=1)


_HESS_OPS = {"bT_A": bT_A, "bT_A_b": bT_A_b, "B_times": B_times, "times_B": times_B, "B_star": B_star}


def hess_algebra(op: str, *args):
    """Dispatch one of ``bT_A``, ``bT_A_b``, ``B_times``, ``times_B``, ``B_star``."""
    try:
        fn = _HESS_OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}") from None
    try:
        return fn(*args)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc


# ----------------------------------------------------------------------------
# propagation
# ----------------------------------------------------------------------------

def _params_arrays(lmap: LomeliMap):
    p = lmap.params
    lo = np.array([float(x.lo) for x in (p.a, p.b, p.c, p.alpha, p.tau)])
    hi = np.array([float(x.hi) for x in (p.a, p.b, p.c, p.alpha, p.tau)])
    return lo, hi


def iterate(lmap: LomeliMap, S: LohnerSet, D: LohnerDerivative, steps: int, direction: int,
            deriv=True, backend=None):
    """Apply ``steps`` Lohner steps in ``direction`` to batched representations."""
    k = kernels.get(backend)
    plo, phi = _params_arrays(lmap)
    out = k.lohner_iterate(
        np.ascontiguousarray(S.x0, float), np.ascontiguousarray(S.A, float),
        np.ascontiguousarray(S.b.lo), np.ascontiguousarray(S.b.hi),
        np.ascontiguousarray(S.r.lo), np.ascontiguousarray(S.r.hi),
        np.ascontiguousarray(D.X0, float), np.ascontiguousarray(D.Aq, float),
        np.ascontiguousarray(D.R.lo), np.ascontiguousarray(D.R.hi),
        plo, phi, int(steps), int(direction), bool(deriv))
    x0, A, rlo, rhi, X0, Aq, Rlo, Rhi = out
    rlo, rhi = np.asarray(rlo), np.asarray(rhi)
    Rlo, Rhi = np.asarray(Rlo), np.asarray(Rhi)
    bad = ~(np.isfinite(rlo) & np.isfinite(rhi)).all(-1)
    if deriv:
        bad |= ~(np.isfinite(Rlo) & np.isfinite(Rhi)).all((-2, -1))
    if np.any(bad):
        # non-finite enclosures are widened to the whole line so that they fail checks
        rlo = np.where(bad[:, None], -np.inf, rlo)
        rhi = np.where(bad[:, None], np.inf, rhi)
    S2 = LohnerSet(np.asarray(x0), np.asarray(A), S.b, Interval(rlo, rhi, check=False))
    D2 = LohnerDerivative(np.asarray(X0), np.asarray(Aq), Interval(Rlo, Rhi, check=False))
    return S2, D2


def lohner_step(lmap: LomeliMap, S: LohnerSet, D: LohnerDerivative, direction=FORWARD, backend=None):
    """One step of the representation through ``f`` (or ``f^{-1}``)."""
    return iterate(lmap, S, D, 1, direction, backend=backend)


def lohner_step_general(fun, S: LohnerSet, D: LohnerDerivative, H_U: Interval, U: Interval, deriv=True):
    """One step through a general C^2 map given Hessian enclosures on ``U``.

    ``fun(X)`` returns ``(f(X), Df(X))`` as intervals for point boxes ``X``
    of shape (B,n); ``H_U`` encloses the Hessians ``D^2 f_i`` over ``U``.
    The remainder terms are only valid when the whole set lies in ``U``,
    which is checked first.
    """
    U = U if U.ndim == 2 else U.broadcast_to(S.x0.shape)
    enc = S.enclosure()
    inside = np.all((U.lo <= enc.lo) & (enc.hi <= U.hi), -1)
    if not np.all(inside):
        raise OutsideShrunkDomain(f"{int((~inside).sum())} set(s) not contained in the Hessian domain U")
    fx, J = fun(Interval.point(S.x0))
    x0, A, r, X0, Aq, R = _py_step(S.x0, S.A, S.b, S.r, D.X0, D.Aq, D.R, fx, J, H_U, deriv=deriv)
    return LohnerSet(x0, A, S.b, r), LohnerDerivative(X0, Aq, R)


def initial_representation(seed_box: Interval):
    """``x = x0 + b`` with ``A = Id, r = 0`` and ``X = Id`` (batched over leading axis)."""
    box = seed_box if seed_box.ndim == 2 else seed_box.reshape(1, -1)
    B, n = box.shape
    x0 = box.mid()
    b = box - x0
    A = np.broadcast_to(np.eye(n), (B, n, n)).copy()
    S = LohnerSet(x0, A, b, Interval.zeros((B, n)))
    D = LohnerDerivative(A.copy(), np.zeros((B, n, n, n)), Interval.zeros((B, n, n)))
    return S, D


def propagate(lmap: LomeliMap, seed_box: Interval, k: int, backend=None):
    """Lohner enclosures of ``f^k`` and ``Df^k`` on ``seed_box`` (negative k: inverse)."""
    S, D = initial_representation(seed_box)
    if k != 0:
        S, D = iterate(lmap, S, D, abs(k), FORWARD if k > 0 else INVERSE, backend=backend)
    return S, D


def propagate_naive(lmap: LomeliMap, box: Interval, k: int) -> Interval:
    """Direct interval composition ``f([f([... [x] ...])])`` for comparison."""
    d = FORWARD if k >= 0 else INVERSE
    x = box
    for _ in range(abs(k)):
        x = lmap.apply(x, d)
    return x


# ----------------------------------------------------------------------------
# chart-seeded propagation and F, DF
# ----------------------------------------------------------------------------

def chart_representation(chart: TaylorChart, box: Interval):
    """Lohner pair for ``theta -> P(theta)`` on boxes (B,2).

    Taylor expansion about the box centre; the tail bound enters ``r`` and the
    Cauchy derivative bound enters ``R``.
    """
    s, t = box[:, 0], box[:, 1]
    c = box.mid()
    b = box - c
    cs, ct = Interval.point(c[:, 0]), Interval.point(c[:, 1])
    val_c, grad_c, hess_c = chart.jets(cs, ct, with_tail=False, check=False)
    _, _, hess_box = chart.jets(s, t, with_tail=False, check=False)
    x0 = val_c.mid()
    A = grad_c.mid()
    d = chart.tail_delta
    cd = chart.cauchy_bound()
    r = (val_c - x0) + ((grad_c - A) @ b[..., None])[..., 0] + 0.5 * _quad_form(b, hess_box) + Interval(-d, d)
    Aq = hess_c.mid()
    bH = (b[:, None, None, :] @ (hess_box - Aq))[..., 0, :]
    R = (grad_c - A) + bH + Interval(-cd, cd)
    return LohnerSet(x0, A, b, r), LohnerDerivative(A.copy(), Aq, R)


class HeteroclinicProblem:
    """``F(theta, phi) = f^{l1}(P1(theta)) - f^{-l2}(P2(phi))`` and its Jacobian.

    Calling the object on a batch of boxes ``Q`` of shape (B,4) returns
    ``(F (B,3), DF (B,3,4) or None, inside (B,))``; entries with ``inside``
    False were outside the shrunk chart domains and carry infinite enclosures.
    """

    dim_in = 4
    dim_out = 3

    def __init__(self, lmap: LomeliMap, chart_u: TaylorChart, chart_s: TaylorChart, l1: int, l2: int,
                 backend=None):
        self.lmap = lmap
        self.chart_u = chart_u
        self.chart_s = chart_s
        self.l1 = int(l1)
        self.l2 = int(l2)
        self.backend = backend

    def _branch(self, chart, box, steps, direction, deriv):
        inside = chart.check_domain(box[:, 0], box[:, 1])
        safe = box.copy()
        if not np.all(inside):
            safe.lo[~inside] = 0.0
            safe.hi[~inside] = 0.0
        S, D = chart_representation(chart, safe)
        if steps:
            S, D = iterate(self.lmap, S, D, steps, direction, deriv=deriv, backend=self.backend)
        val = S.enclosure()
        der = D.enclosure(S.b) if deriv else None
        return val, der, inside

    def __call__(self, Q: Interval, deriv=True):
        Q = Q if Q.ndim == 2 else Q.reshape(1, -1)
        vu, du, iu = self._branch(self.chart_u, Q[:, 0:2], self.l1, FORWARD, deriv)
        vs, ds, is_ = self._branch(self.chart_s, Q[:, 2:4], self.l2, INVERSE, deriv)
        inside = iu & is_
        F = vu - vs
        DF = concatenate([du, -ds], axis=-1) if deriv else None
        if not np.all(inside):
            F.lo[~inside] = -np.inf
            F.hi[~inside] = np.inf
            if DF is not None:
                DF.lo[~inside] = -np.inf
                DF.hi[~inside] = np.inf
        return F, DF, inside

    def evaluate(self, Q: Interval):
        """``(F, DF)`` for a single box; raises OutsideShrunkDomain."""
        F, DF, inside = self(Q.reshape(1, -1))
        if not inside[0]:
            raise OutsideShrunkDomain("box leaves the shrunk chart domain")
        return F[0], DF[0]

    # floating twin -----------------------------------------------------------
    def float_F(self, q, deriv=True):
        q = np.atleast_2d(np.asarray(q, float))
        with np.errstate(all="ignore"):
            xu, Xu = self.chart_u.eval_float(q[:, 0:2])
            xs, Xs = self.chart_s.eval_float(q[:, 2:4])
            for _ in range(self.l1):
                if deriv:
                    Xu = self.lmap.jacobian(xu, FORWARD) @ Xu
                xu = self.lmap.apply(xu, FORWARD)
            for _ in range(self.l2):
                if deriv:
                    Xs = self.lmap.jacobian(xs, INVERSE) @ Xs
                xs = self.lmap.apply(xs, INVERSE)
        F = xu - xs
        if not deriv:
            return F, None
        return F, np.concatenate([Xu, -Xs], axis=-1)

    def radius_ok(self, q, margin=0.0):
        q = np.atleast_2d(q)
        rmax = np.exp(-self.chart_u.sigma) - margin
        return (np.hypot(q[:, 0], q[:, 1]) < rmax) & (np.hypot(q[:, 2], q[:, 3]) < np.exp(-self.chart_s.sigma) - margin)


def eval_F_DF(theta_box: Interval, phi_box: Interval, charts, l1: int, l2: int, lmap: LomeliMap | None = None):
    """``(F (3,), DF (3,4))`` enclosures on one box pair."""
    cu, cs = charts
    lmap = lmap or LomeliMap(cu.params)
    prob = HeteroclinicProblem(lmap, cu, cs, l1, l2)
    Q = concatenate([theta_box.reshape(-1), phi_box.reshape(-1)])
    return prob.evaluate(Q)


def step_diameters(lmap: LomeliMap, seed_box: Interval, k: int, backend=None):
    """Per-step diameters of the Lohner and naive enclosures (diagnostics)."""
    S, D = initial_representation(seed_box)
    x = seed_box if seed_box.ndim == 2 else seed_box.reshape(1, -1)
    d = FORWARD if k >= 0 else INVERSE
    rows = []
    for i in range(abs(k)):
        S, D = iterate(lmap, S, D, 1, d, backend=backend)
        x = lmap.apply(x, d)
        enc = S.enclosure()
        cond = float(np.linalg.cond(S.A[0]))
        rows.append((i + 1, float(enc.width().max()), float(x.width().max()), cond))
    return rows
