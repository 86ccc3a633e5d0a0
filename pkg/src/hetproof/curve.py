"""Validation of one-dimensional zero sets of ``F : R^m -> R^{m-1}``.

A chain of point enclosures ``p*_1, ..., p*_{N+1}`` is joined by segments
``p*_n + A1 x + A2 y`` with ``x in [0, 1]``.  The directed Newton operator

    N = y0 - [DF(T) A2]^{-1} (F(p*_n + A1/2 + A2 y0) + [DF(T) A1][-1/2, 1/2])

with ``T`` the whole tube, is checked to map ``Y`` strictly into itself.
Every evaluator used here follows the same protocol: calling it on a batch of
boxes ``(B, m)`` returns ``(F (B, k), DF (B, k, m), inside (B,))``, and
``float_F(q, deriv)`` is its floating twin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (BrokenChain, ClosureFailed, DegenerateSegment, InclusionFailed,
                     InflationDiverged, SingularEnclosure, ShapeMismatch)
from .interval import Interval, concatenate, matmul, solve_batch, stack

log = logging.getLogger(__name__)

CHUNK = 256
HALF = Interval(-0.5, 0.5)
UNIT = Interval(0.0, 1.0)


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------
class CircleProblem:
    """Toy evaluator ``F(x, y) = x^2 + y^2 - 1`` (zero set: the unit circle)."""

    dim_in = 2
    dim_out = 1

    def __call__(self, Q: Interval, deriv=True):
        Q = Q if Q.ndim == 2 else Q.reshape(1, -1)
        x, y = Q[:, 0], Q[:, 1]
        F = (x.sqr() + y.sqr() - 1.0).reshape(-1, 1)
        DF = stack([2.0 * x, 2.0 * y], -1).reshape(-1, 1, 2) if deriv else None
        return F, DF, np.ones(Q.shape[0], bool)

    def float_F(self, q, deriv=True):
        q = np.atleast_2d(np.asarray(q, float))
        F = (q[:, 0] ** 2 + q[:, 1] ** 2 - 1.0)[:, None]
        if not deriv:
            return F, None
        return F, (2.0 * q)[:, None, :]

    def radius_ok(self, q, margin=0.0):
        return np.ones(np.atleast_2d(q).shape[0], bool)


def evaluate(ev, Q: Interval, deriv=True, chunk=CHUNK, pool=None):
    """Chunked evaluation with fixed padded chunk size.

    Every chunk is padded to ``chunk`` rows so that the floating point
    kernels see identical shapes regardless of the batch size; this keeps
    reruns bitwise reproducible.
    """
    B = Q.shape[0]
    if B == 0:
        k, m = ev.dim_out, ev.dim_in
        return Interval.zeros((0, k)), (Interval.zeros((0, k, m)) if deriv else None), np.zeros(0, bool)
    pieces = []
    for start in range(0, B, chunk):
        q = Q[start:start + chunk]
        n = q.shape[0]
        if n < chunk:
            pad = np.zeros(chunk - n, int)
            q = concatenate([q, q[pad]], axis=0)
        pieces.append((q, n))
    if pool is not None:
        results = pool.map(_eval_piece, [(q, deriv) for q, _ in pieces])
    else:
        results = [ev(q, deriv) for q, _ in pieces]
    Fs, DFs, ins = [], [], []
    for (q, n), (F, DF, inside) in zip(pieces, results):
        Fs.append(F[:n])
        ins.append(inside[:n])
        if deriv:
            DFs.append(DF[:n])
    F = concatenate(Fs, axis=0)
    DF = concatenate(DFs, axis=0) if deriv else None
    return F, DF, np.concatenate(ins)


_WORKER_EV = None


def _init_worker(ev):
    global _WORKER_EV
    _WORKER_EV = ev


def _eval_piece(args):
    q, deriv = args
    return _WORKER_EV(q, deriv)


def make_pool(ev, jobs):
    """Process pool whose workers hold a copy of ``ev`` (None for jobs <= 1)."""
    if not jobs or jobs <= 1:
        return None
    from concurrent.futures import ProcessPoolExecutor
    return ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ev,))


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------
@dataclass
class PointEnclosure:
    """``{x_fixed} x Y`` with ``x_fixed`` placed at coordinate ``axis``."""

    axis: int
    x_fixed: float
    Y: Interval
    newton_image: Interval | None = None
    passed: bool = False

    @property
    def pinned_axes(self):
        return (self.axis,)

    def box(self) -> Interval:
        return _insert(np.array([self.axis]), np.array([self.x_fixed]), self.Y.reshape(1, -1))[0]

    def to_json(self):
        return {"axis": int(self.axis), "x_fixed": repr(float(self.x_fixed)), "Y": self.Y.to_json(),
                "newton_image": self.newton_image.to_json() if self.newton_image is not None else None,
                "pass": bool(self.passed)}

    @classmethod
    def from_json(cls, d):
        ni = d.get("newton_image")
        return cls(int(d["axis"]), float(d["x_fixed"]), Interval.from_json(d["Y"]),
                   Interval.from_json(ni) if ni is not None else None, bool(d.get("pass", False)))


def _insert(axes, xs, Y: Interval) -> Interval:
    """Boxes in R^m from pinned values ``xs`` at ``axes`` and free part ``Y`` (B, m-1)."""
    B, k = Y.shape
    m = k + 1
    lo = np.empty((B, m))
    hi = np.empty((B, m))
    cols = np.arange(m)[None, :]
    free = cols != axes[:, None]
    lo[free] = Y.lo.reshape(-1)
    hi[free] = Y.hi.reshape(-1)
    lo[~free] = xs
    hi[~free] = xs
    return Interval(lo, hi)


def _free_columns(DF: Interval, axes):
    B, k, m = DF.shape
    idx = np.array([[j for j in range(m) if j != a] for a in axes])
    take = np.broadcast_to(idx[:, None, :], (B, k, k))
    return Interval(np.take_along_axis(DF.lo, take, -1), np.take_along_axis(DF.hi, take, -1))


def point_newton(ev, axes, xs, Y: Interval, pool=None):
    """Newton images ``y0 - [D_Y F(x0, Y)]^{-1} F(x0, y0)`` for a batch of points.

    Returns ``(N, ok)``; ``ok`` is False where the derivative enclosure could
    not be inverted or a box left the evaluator domain.
    """
    axes = np.asarray(axes, int)
    xs = np.asarray(xs, float)
    y0 = Y.mid()
    full = _insert(axes, xs, Y)
    centre = _insert(axes, xs, Interval.point(y0))
    _, DF, inside = evaluate(ev, full, True, pool=pool)
    F0, _, inside0 = evaluate(ev, centre, False, pool=pool)
    M = _free_columns(DF, axes)
    z, ok = solve_batch(M, F0)
    N = Interval.point(y0) - z
    ok = ok & inside & inside0 & np.all(N.is_finite(), -1)
    return N, ok


def validate_point(ev, x0, Y, axis=0) -> PointEnclosure:
    """Certify a unique zero of ``F`` in ``{x0} x Y`` (``x0`` at coordinate ``axis``)."""
    Y = Y if isinstance(Y, Interval) else Interval.point(np.asarray(Y, float))
    Y = Y.reshape(1, -1)
    N, ok = point_newton(ev, [axis], [x0], Y)
    if not ok[0]:
        raise SingularEnclosure("derivative enclosure could not be inverted")
    if not np.all(Y.interior_contains(N)):
        raise InclusionFailed("Newton image not inside int Y", image=N[0], Y=Y[0])
    return PointEnclosure(int(axis), float(x0), Y[0], N[0], True)


def inflate_points(ev, seeds, axes, start_rad=1e-12, factor=1.1, floor=1e-14, max_iter=30, pool=None):
    """Batched epsilon inflation for point enclosures around float ``seeds`` (B, m).

    Returns ``(Y, N, passed)``.
    """
    seeds = np.asarray(seeds, float)
    axes = np.asarray(axes, int)
    B, m = seeds.shape
    xs = seeds[np.arange(B), axes]
    free = np.arange(m)[None, :] != axes[:, None]
    y = seeds[free].reshape(B, m - 1)
    Y = Interval(y - start_rad, y + start_rad)
    N = Y.copy()
    passed = np.zeros(B, bool)
    todo = np.arange(B)
    for _ in range(max_iter):
        if len(todo) == 0:
            break
        Nt, ok = point_newton(ev, axes[todo], xs[todo], Y[todo], pool=pool)
        good = ok & np.all(Y[todo].interior_contains(Nt), -1)
        N[todo] = Nt
        passed[todo[good]] = True
        bad = todo[~good]
        nb = Nt[~good]
        okb = ok[~good]
        # inflate around the hull of the old box and the new image
        grown = Y[bad].hull(where_ok(nb, okb, Y[bad])).inflate(factor, floor)
        Y[bad] = grown
        todo = bad
    return Y, N, passed


def where_ok(N: Interval, ok, fallback: Interval) -> Interval:
    lo = np.where(ok[:, None], N.lo, fallback.lo)
    hi = np.where(ok[:, None], N.hi, fallback.hi)
    return Interval._raw(lo, hi)


# ---------------------------------------------------------------------------
# frames and segments
# ---------------------------------------------------------------------------
def complement(u):
    """Orthonormal complement (m, m-1) of the nonzero vector ``u``."""
    Q, _ = np.linalg.qr(u[:, None], mode="complete")
    return Q[:, 1:]


def build_frames(p_star_chain):
    """``(A1, A2)`` for every consecutive pair of the chain of boxes."""
    if len(p_star_chain) < 2:
        raise ValueError("chain needs at least two point enclosures")
    frames = []
    for i in range(len(p_star_chain) - 1):
        A1 = p_star_chain[i + 1] - p_star_chain[i]
        u = A1.mid()
        nu = np.linalg.norm(u)
        if not np.isfinite(nu) or nu == 0.0 or nu <= np.linalg.norm(A1.rad()):
            raise DegenerateSegment(f"segment {i} has (nearly) zero length")
        frames.append((A1, complement(u / nu)))
    return frames


def _tube(P: Interval, A1: Interval, A2, Y: Interval, x: Interval) -> Interval:
    """``P + A1 x + A2 Y`` in interval arithmetic, batched (B, m)."""
    return P + A1 * x + matmul(A2, Y[..., None])[..., 0]


def segment_newton(ev, P: Interval, A1: Interval, A2, Y: Interval, pool=None):
    """Directed Newton images for a batch of segments.

    Returns ``(N, Dq, ok)`` with ``Dq`` the enclosure of ``-[DF A2]^{-1} DF A1``.
    """
    y0 = Y.mid()
    tube = _tube(P, A1, A2, Y, UNIT)
    centre = _tube(P, A1, A2, Interval.point(y0), Interval(0.5, 0.5))
    _, DF, inside = evaluate(ev, tube, True, pool=pool)
    F0, _, inside0 = evaluate(ev, centre, False, pool=pool)
    M = matmul(DF, A2)
    G = matmul(DF, A1[..., None])[..., 0]
    z, ok = solve_batch(M, F0 + G * HALF)
    w, ok2 = solve_batch(M, G)
    N = Interval.point(y0) - z
    ok = ok & ok2 & inside & inside0 & np.all(N.is_finite(), -1)
    return N, -w, ok


@dataclass
class SegmentEnclosure:
    index: int
    p_star: Interval
    p_next: Interval
    A1: Interval
    A2: np.ndarray
    Y: Interval
    newton_image: Interval
    passed: bool
    transversal: bool
    Dq_bound: Interval
    X: tuple = (0.0, 1.0)

    def tube(self) -> Interval:
        return _tube(self.p_star.reshape(1, -1), self.A1.reshape(1, -1), self.A2[None], self.Y.reshape(1, -1),
                     UNIT)[0]

    def to_json(self):
        return {"index": int(self.index), "p_star": self.p_star.to_json(), "p_next": self.p_next.to_json(),
                "A1": self.A1.to_json(), "A2": [[repr(float(v)) for v in row] for row in self.A2],
                "X": [repr(self.X[0]), repr(self.X[1])], "Y": self.Y.to_json(),
                "newton_image": self.newton_image.to_json(), "pass": bool(self.passed),
                "transversal": bool(self.transversal), "Dq_bound": self.Dq_bound.to_json()}

    @classmethod
    def from_json(cls, d):
        return cls(int(d["index"]), Interval.from_json(d["p_star"]), Interval.from_json(d["p_next"]),
                   Interval.from_json(d["A1"]), np.array([[float(v) for v in row] for row in d["A2"]]),
                   Interval.from_json(d["Y"]), Interval.from_json(d["newton_image"]), bool(d["pass"]),
                   bool(d["transversal"]), Interval.from_json(d["Dq_bound"]))


def validate_segment(ev, frame, p_star, Y, index=0, p_next=None) -> SegmentEnclosure:
    """Single-segment directed Newton check; raises InclusionFailed."""
    A1, A2 = frame
    seg = validate_segments(ev, [p_star], [A1], [A2], Y.reshape(1, -1), p_next=[p_next])[0]
    seg.index = index
    if not seg.transversal:
        raise SingularEnclosure("DF A2 enclosure could not be inverted")
    if not seg.passed:
        raise InclusionFailed("directed Newton image not inside int Y", image=seg.newton_image, Y=Y)
    return seg


def validate_segments(ev, P_list, A1_list, A2_list, Y: Interval, p_next=None, pool=None):
    """Batched directed Newton validation; returns a list of SegmentEnclosure."""
    P = stack(list(P_list), 0)
    A1 = stack(list(A1_list), 0)
    A2 = np.stack(list(A2_list))
    if A2.shape[-1] != Y.shape[-1] or P.shape[-1] != A2.shape[-2]:
        raise ShapeMismatch("frame and Y dimensions disagree")
    N, Dq, ok = segment_newton(ev, P, A1, A2, Y, pool=pool)
    inner = np.all(Y.interior_contains(N), -1) & np.all(Y.interior_contains(0.0), -1) & ok
    out = []
    for i in range(P.shape[0]):
        pn = p_next[i] if p_next is not None and p_next[i] is not None else P[i] + A1[i]
        out.append(SegmentEnclosure(i, P[i], pn, A1[i], A2[i], Y[i], N[i], bool(inner[i]), bool(ok[i]), Dq[i]))
    return out


def inflate_Y(ev, frames, P_list, factor=1.1, floor=1e-14, max_iter=30, cap=1e-2, strict=False, pool=None):
    """Epsilon inflation of ``Y`` for a batch of segments, starting from ``Y = {0}``.

    Returns ``(Y, passed)``.  The boxes are kept containing 0 so that the
    validated curve pieces join at the chain points.  Boxes whose radius
    exceeds ``cap`` are abandoned; with ``strict`` this raises InflationDiverged.
    """
    P = stack(list(P_list), 0)
    A1 = stack([f[0] for f in frames], 0)
    A2 = np.stack([f[1] for f in frames])
    B = P.shape[0]
    k = A2.shape[-1]
    Y = Interval.zeros((B, k))
    passed = np.zeros(B, bool)
    diverged = np.zeros(B, bool)
    todo = np.arange(B)
    for _ in range(max_iter):
        if len(todo) == 0:
            break
        N, _, ok = segment_newton(ev, P[todo], A1[todo], A2[todo], Y[todo], pool=pool)
        Yt = Y[todo]
        good = ok & np.all(Yt.interior_contains(N), -1) & np.all(Yt.interior_contains(0.0), -1)
        passed[todo[good]] = True
        bad = ~good
        grown = Yt[bad].hull(where_ok(N[bad], ok[bad], Yt[bad])).hull(Interval.zeros(Yt[bad].shape))
        grown = grown.inflate(factor, floor)
        Y[todo[bad]] = grown
        todo = todo[bad]
        big = np.max(grown.rad(), -1) > cap if len(todo) else np.zeros(0, bool)
        diverged[todo[big]] = True
        todo = todo[~big]
    if strict and np.any(diverged):
        raise InflationDiverged(f"Y grew beyond radius {cap}")
    return Y, passed


# ---------------------------------------------------------------------------
# chains and closure
# ---------------------------------------------------------------------------
@dataclass
class CurveCertificate:
    kind: str  # "fundamental_loop" or "m_fold_arc"
    m: int
    points: list
    segments: list
    closure: dict
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(s.passed for s in self.segments) and bool(self.closure.get("verified"))

    def to_json(self):
        return {"kind": self.kind, "m": int(self.m), "meta": self.meta, "closure": self.closure,
                "points": [p.to_json() for p in self.points],
                "segments": [s.to_json() for s in self.segments]}

    @classmethod
    def from_json(cls, d):
        return cls(d["kind"], int(d["m"]), [PointEnclosure.from_json(p) for p in d["points"]],
                   [SegmentEnclosure.from_json(s) for s in d["segments"]], d["closure"], d.get("meta", {}))


def closure_matrix(chart_u, chart_s) -> Interval:
    """Block-diagonal interval matrix of the linear dynamics on (theta, phi)."""
    Lu = chart_u.linear_dynamics()
    Ls = chart_s.linear_dynamics()
    lo = np.zeros((4, 4))
    hi = np.zeros((4, 4))
    lo[:2, :2], hi[:2, :2] = Lu.lo, Lu.hi
    lo[2:, 2:], hi[2:, 2:] = Ls.lo, Ls.hi
    return Interval(lo, hi)


def matrix_power(B: Interval, j: int) -> Interval:
    n = B.shape[0]
    out = Interval.point(np.eye(n))
    for _ in range(j):
        out = matmul(B, out)
    return out


def inverse_linear(B: Interval) -> Interval:
    """Interval inverse of a block matrix of 2x2 scaled rotations ``[[a, -b], [b, a]]``."""
    n = B.shape[0]
    lo = np.zeros((n, n))
    hi = np.zeros((n, n))
    out = Interval(lo, hi)
    for i in range(0, n, 2):
        a = B[i, i]
        b = B[i + 1, i]
        d = a.sqr() + b.sqr()
        ia = a / d
        ib = b / d
        out[i, i] = ia
        out[i + 1, i + 1] = ia
        out[i, i + 1] = ib
        out[i + 1, i] = -ib
    return out


def check_chain(segments, kind, closure=None):
    """Structural checks: consecutive segments share their endpoint boxes.

    Raises BrokenChain.  For loops the last segment must end at the first
    point; for arcs it must end at ``B^m p*_1``.
    """
    n = len(segments)
    for i in range(n - 1):
        a, b = segments[i].p_next, segments[i + 1].p_star
        if not (np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)):
            raise BrokenChain(f"segment {i} does not end where segment {i + 1} starts")
    if kind == "fundamental_loop":
        a, b = segments[-1].p_next, segments[0].p_star
        if not (np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)):
            raise BrokenChain("loop does not close")


def arc_closure(B: Interval, m: int, p_first: Interval, p_end: Interval, end_point: Interval | None,
                inflate=10.0):
    """Evidence for ``p*_{N+1} = B^m p*_1``.

    ``end_point`` is an independently validated point enclosure near the end;
    the mapped first box must meet it and lie in its inflation.
    """
    Bm = matrix_power(B, m)
    image = matmul(Bm, p_first[:, None])[:, 0]
    same = np.array_equal(image.lo, p_end.lo) and np.array_equal(image.hi, p_end.hi)
    ev = {"B": B.to_json(), "m": int(m), "image": image.to_json(), "endpoint_is_image": bool(same)}
    ok = same
    if end_point is not None:
        meets = bool(np.all(image.overlaps(end_point)))
        # the pinned coordinate of the validated end has zero width, hence the floor
        floor = inflate * max(float(image.rad().max()), float(end_point.rad().max()))
        grown = end_point.inflate(inflate, floor)
        within = bool(np.all(grown.contains(image)))
        ev.update({"validated_end": end_point.to_json(), "meets_validated_end": meets,
                   "inside_inflated_end": within})
        ok = ok and meets and within
    ev["verified"] = bool(ok)
    return ev


def tangents(seeds, closed):
    """Chord tangents at the seeds (central differences; one-sided at arc ends)."""
    q = np.asarray(seeds, float)
    if closed:
        t = np.roll(q, -1, 0) - np.roll(q, 1, 0)
    else:
        t = np.empty_like(q)
        t[1:-1] = q[2:] - q[:-2]
        t[0] = q[1] - q[0]
        t[-1] = q[-1] - q[-2]
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def polish(ev, q, axes, iters=8):
    """Floating Newton on the free coordinates with one coordinate pinned."""
    q = np.array(q, float, copy=True)
    B, m = q.shape
    idx = np.array([[j for j in range(m) if j != a] for a in axes])
    rows = np.arange(B)[:, None]
    for _ in range(iters):
        F, DF = ev.float_F(q)
        M = np.take_along_axis(DF, np.broadcast_to(idx[:, None, :], DF.shape[:2] + (m - 1,)), -1)
        with np.errstate(all="ignore"):
            try:
                d = np.linalg.solve(M, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                d = np.stack([np.linalg.lstsq(Mi, Fi, rcond=None)[0] for Mi, Fi in zip(M, F)])
        d = np.where(np.isfinite(d), d, 0.0)
        q[rows, idx] -= d
    return q


class ChainValidator:
    """Validate a closed (loop) or open (arc) chain of floating seeds.

    Parameters
    ----------
    ev : evaluator (interval call plus ``float_F``)
    kind : "fundamental_loop" or "m_fold_arc"
    B, m : linear dynamics and fold for arcs
    max_depth : bisection depth for failing segments
    """

    def __init__(self, ev, kind="fundamental_loop", B=None, m=1, max_depth=6, pool=None):
        self.ev = ev
        self.kind = kind
        self.B = B
        self.m = int(m)
        self.max_depth = int(max_depth)
        self.pool = pool
        self.stats = {"bisections": 0, "point_retries": 0}

    # points ----------------------------------------------------------------
    def _points(self, seeds, tang):
        axes = np.argmax(np.abs(tang), 1)
        seeds = polish(self.ev, seeds, axes)
        Y, N, passed = inflate_points(self.ev, seeds, axes, pool=self.pool)
        if not np.all(passed):
            # second-best pinned coordinate for the stubborn ones
            bad = np.nonzero(~passed)[0]
            self.stats["point_retries"] += len(bad)
            alt = np.argsort(-np.abs(tang[bad]), 1)[:, 1]
            sb = polish(self.ev, seeds[bad], alt)
            Yb, Nb, pb = inflate_points(self.ev, sb, alt, pool=self.pool)
            if not np.all(pb):
                i = int(bad[np.nonzero(~pb)[0][0]])
                raise InclusionFailed(f"point {i} could not be validated", image=Nb[~pb][0], Y=Yb[~pb][0])
            axes[bad] = alt
            seeds[bad] = sb
            Y[bad] = Yb
            N[bad] = Nb
            passed[bad] = True
        B, mm = seeds.shape
        xs = seeds[np.arange(B), axes]
        return [PointEnclosure(int(axes[i]), float(xs[i]), Y[i], N[i], True) for i in range(B)], seeds

    def run(self, seeds):
        seeds = np.asarray(seeds, float)
        closed = self.kind == "fundamental_loop"
        tang = tangents(seeds, closed)
        points, seeds = self._points(seeds, tang)
        depth = np.zeros(len(points), int)
        end_point = None
        if not closed:
            # the last seed is only used for the closure evidence
            end_point = points[-1].box()
            points = points[:-1]
            seeds = seeds[:-1]
            tang = tang[:-1]
            depth = depth[:-1]
        while True:
            boxes = [p.box() for p in points]
            if closed:
                chain = boxes + [boxes[0]]
            else:
                Bm = matrix_power(self.B, self.m)
                chain = boxes + [matmul(Bm, boxes[0][:, None])[:, 0]]
            frames = build_frames(chain)
            Y, passed = inflate_Y(self.ev, frames, chain[:-1], pool=self.pool)
            segs = validate_segments(self.ev, chain[:-1], [f[0] for f in frames], [f[1] for f in frames], Y,
                                     p_next=chain[1:], pool=self.pool)
            bad = [i for i, s in enumerate(segs) if not s.passed]
            if not bad:
                break
            if max(depth[i] for i in bad) >= self.max_depth:
                i = bad[0]
                raise InclusionFailed(f"segment {i} failed after {self.max_depth} bisections",
                                      image=segs[i].newton_image, Y=segs[i].Y)
            points, seeds, depth = self._bisect(points, seeds, depth, bad, chain)
        for i, s in enumerate(segs):
            s.index = i
        check_chain(segs, self.kind)
        if closed:
            closure = {"type": "loop", "verified": True, "first_equals_last": True}
        else:
            closure = arc_closure(self.B, self.m, chain[0], chain[-1], end_point)
            closure["type"] = "arc"
            if not closure["verified"]:
                raise ClosureFailed("B^m image of the first box does not match the validated end")
        return CurveCertificate(self.kind, self.m, points, segs, closure,
                                {"segments": len(segs), "bisections": self.stats["bisections"]})

    def _bisect(self, points, seeds, depth, bad, chain):
        """Insert a polished midpoint seed into every failing segment."""
        self.stats["bisections"] += len(bad)
        n = len(points)
        mids = []
        for i in bad:
            a = chain[i].mid()
            b = chain[i + 1].mid()
            mids.append(0.5 * (a + b))
        mids = np.array(mids)
        t = np.array([chain[i + 1].mid() - chain[i].mid() for i in bad])
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        newp, newq = self._points(mids, t)
        out_p, out_q, out_d = [], [], []
        j = 0
        for i in range(n):
            out_p.append(points[i])
            out_q.append(seeds[i])
            if j < len(bad) and bad[j] == i:
                # both halves of a bisected segment inherit depth + 1
                out_d.extend([depth[i] + 1, depth[i] + 1])
                out_p.append(newp[j])
                out_q.append(newq[j])
                j += 1
            else:
                out_d.append(depth[i])
        return out_p, np.array(out_q), np.array(out_d)


def validate_chain(segments, closure_spec) -> CurveCertificate:
    """Assemble a certificate from already validated segments.

    ``closure_spec`` is ``{"kind": "fundamental_loop"}`` or
    ``{"kind": "m_fold_arc", "B": Interval (4,4), "m": 3, "end_point": box or None}``.
    """
    if not segments:
        raise BrokenChain("empty chain")
    for s in segments:
        if not s.passed:
            raise InclusionFailed(f"segment {s.index} did not pass", image=s.newton_image, Y=s.Y)
    kind = closure_spec["kind"]
    check_chain(segments, kind)
    if kind == "fundamental_loop":
        closure = {"type": "loop", "verified": True, "first_equals_last": True}
        m = 1
    else:
        m = int(closure_spec.get("m", 3))
        closure = arc_closure(closure_spec["B"], m, segments[0].p_star, segments[-1].p_next,
                              closure_spec.get("end_point"))
        closure["type"] = "arc"
        if not closure["verified"]:
            raise ClosureFailed("B^m closure not verified")
    return CurveCertificate(kind, m, [], list(segments), closure, {"segments": len(segments)})


# ---------------------------------------------------------------------------
# inner dynamics
# ---------------------------------------------------------------------------
@dataclass
class InnerImage:
    step: int
    path: int
    segment: int
    box: Interval
    rigorous: bool


def propagate_inner(certificate: CurveCertificate, B: Interval, steps, radius_u: float, radius_s: float,
                    paths: int | None = None):
    """Images of the segment tubes under ``B^j`` for ``j`` in ``steps``.

    ``steps`` is an int (``0..steps`` or ``steps..0``) or an iterable of
    signed powers.  Images are flagged rigorous when they stay inside both
    shrunk chart disks.  For arcs with fold m the path id is ``j mod m``.
    """
    if isinstance(steps, (int, np.integer)):
        steps = range(0, steps + 1) if steps >= 0 else range(steps, 1)
    steps = list(steps)
    m = paths or (certificate.m if certificate.kind == "m_fold_arc" else 1)
    Binv = inverse_linear(B)
    tubes = stack([s.tube() for s in certificate.segments], 0)  # (S, 4)
    out = []
    cache = {0: Interval.point(np.eye(B.shape[0]))}
    for j in steps:
        if j not in cache:
            base = B if j > 0 else Binv
            prev = j - 1 if j > 0 else j + 1
            if prev not in cache:
                cache[prev] = matrix_power(base, abs(prev))
            cache[j] = matmul(base, cache[prev])
        M = cache[j]
        if j == 0:
            imgs = tubes
        else:
            # E = B^j (p* + A1 X + A2 Y) evaluated as a parallelotope, then hulled
            imgs = _map_tubes(M, certificate.segments)
        ru = (imgs[:, 0].sqr() + imgs[:, 1].sqr()).hi
        rs = (imgs[:, 2].sqr() + imgs[:, 3].sqr()).hi
        rig = (ru <= radius_u ** 2) & (rs <= radius_s ** 2) & np.all(imgs.is_finite(), -1)
        for i in range(imgs.shape[0]):
            out.append(InnerImage(j, j % m, i, imgs[i], bool(rig[i])))
    return out


def _map_tubes(M: Interval, segments):
    P = stack([s.p_star for s in segments], 0)
    A1 = stack([s.A1 for s in segments], 0)
    A2 = np.stack([s.A2 for s in segments])
    Y = stack([s.Y for s in segments], 0)
    Mb = M.broadcast_to((P.shape[0],) + M.shape)
    MP = matmul(Mb, P[..., None])[..., 0]
    MA1 = matmul(Mb, A1[..., None])[..., 0]
    MA2 = matmul(Mb, Interval.point(A2))
    return MP + MA1 * UNIT + matmul(MA2, Y[..., None])[..., 0]
