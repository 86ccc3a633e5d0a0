"""Nonrigorous seed chains along the zero set of ``F`` (floating point only).

Initial zeros come from dense random sampling followed by Gauss-Newton; the
curve through a chosen zero is then traced by pseudo-arclength continuation
and resampled at uniform arclength.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContinuationStalled, NoSeedFound

log = logging.getLogger(__name__)


@dataclass
class SeedChain:
    points: np.ndarray  # (K, m)
    closed: bool
    length: float
    residual: float

    @property
    def spacing(self):
        d = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if self.closed:
            d = np.append(d, np.linalg.norm(self.points[0] - self.points[-1]))
        return {"min": float(d.min()), "max": float(d.max()), "mean": float(d.mean())}


def null_vector(DF):
    """Unit kernel vectors of a batch of (m-1, m) Jacobians."""
    DF = np.atleast_3d(DF)
    _, _, Vt = np.linalg.svd(DF)
    return Vt[:, -1, :]


def sample_zeros(ev, n=40000, box=1.0, rmax=0.9, iters=30, tol=1e-12, seed=0):
    """Zeros of ``ev.float_F`` from random starts in ``[-box, box]^m`` (radius filtered)."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(-box, box, (n, ev.dim_in))
    q = q[_in_disks(q, rmax)]
    with np.errstate(all="ignore"):
        for _ in range(iters):
            F, DF = ev.float_F(q)
            good = np.all(np.isfinite(F), 1) & np.all(np.isfinite(DF), (1, 2)) & (np.abs(q).max(1) < 2 * box)
            q, F, DF = q[good], F[good], DF[good]
            if len(q) == 0:
                break
            q = q - np.einsum("bij,bj->bi", np.linalg.pinv(DF), F)
        F, _ = ev.float_F(q, deriv=False)
        ok = np.all(np.isfinite(F), 1) & (np.linalg.norm(F, axis=1) < tol) & _in_disks(q, rmax)
    return q[ok]


def _in_disks(q, rmax):
    q = np.atleast_2d(q)
    if q.shape[1] != 4:
        return np.ones(q.shape[0], bool)
    return (np.hypot(q[:, 0], q[:, 1]) < rmax) & (np.hypot(q[:, 2], q[:, 3]) < rmax)


def correct(ev, pred, t, tol=1e-13, max_iter=12):
    """Newton on ``F(q) = 0, t.(q - pred) = 0``; returns ``(q, ok)``."""
    q = np.array(pred, float)
    m = q.size
    for _ in range(max_iter):
        F, DF = ev.float_F(q[None])
        F, DF = F[0], DF[0]
        if not np.all(np.isfinite(F)):
            return q, False
        G = np.concatenate([F, [t @ (q - pred)]])
        if np.max(np.abs(F)) < tol and abs(G[-1]) < 1e-15 + 1e-12 * np.linalg.norm(q):
            return q, True
        M = np.vstack([DF, t[None]])
        try:
            d = np.linalg.solve(M, G)
        except np.linalg.LinAlgError:
            return q, False
        q = q - d
        if np.linalg.norm(d) < 1e-16 * (1 + np.linalg.norm(q)):
            break
    F, _ = ev.float_F(q[None], deriv=False)
    return q, bool(np.all(np.isfinite(F)) and np.max(np.abs(F)) < 10 * tol)


def trace(ev, q0, direction, h=2e-3, hmin=1e-7, hmax=2e-2, max_steps=200000, rmax=0.94,
          target=None, closed=True):
    """Pseudo-arclength continuation from ``q0``.

    Stops on return to ``q0`` (``closed``), on reaching ``target`` (a float
    point or a list of them, returning the index reached), or on leaving the
    radius-``rmax`` disks.  Returns ``(points, status, which)``.
    """
    q = np.asarray(q0, float)
    _, DF = ev.float_F(q[None])
    t = null_vector(DF)[0]
    if t @ direction < 0:
        t = -t
    pts = [q]
    travelled = 0.0
    targets = None if target is None else np.atleast_2d(target)
    for _ in range(max_steps):
        pred = q + h * t
        qn, ok = correct(ev, pred, t)
        step = np.linalg.norm(qn - q)
        if not ok or step > 2.0 * h or step < 0.25 * h:
            h *= 0.5
            if h < hmin:
                raise ContinuationStalled(f"step size fell below {hmin}")
            continue
        if not _in_disks(qn, rmax)[0]:
            return np.array(pts), "exit", None
        _, DF = ev.float_F(qn[None])
        tn = null_vector(DF)[0]
        if tn @ t < 0:
            tn = -tn
        travelled += step
        # termination tests on the chord q -> qn
        if closed and len(pts) > 5:
            if _chord_hits(q, qn, pts[0]):
                return np.array(pts), "closed", None
        if targets is not None and len(pts) > 5:
            for i, T in enumerate(targets):
                if _chord_hits(q, qn, T):
                    return np.array(pts), "target", i
        pts.append(qn)
        q, t = qn, tn
        h = min(h * 1.3, hmax)
    raise ContinuationStalled("step budget exhausted")


def _chord_hits(a, b, p):
    """True if ``p`` lies closer to the chord ``[a, b]`` than half the chord length, projecting inside."""
    d = b - a
    L2 = d @ d
    s = (p - a) @ d / L2
    if s < 0.0 or s > 1.0:
        return False
    return np.linalg.norm(a + s * d - p) < 0.5 * np.sqrt(L2)


def resample(ev, pts, K, closed, keep_ends=True):
    """``K`` segments at uniform arclength, each point re-corrected onto ``F = 0``."""
    P = np.asarray(pts, float)
    if closed:
        P = np.vstack([P, P[:1]])
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    L = s[-1]
    n_out = K if closed else K + 1
    targets = np.arange(n_out) * (L / K)
    out = []
    for i, st in enumerate(targets):
        if not closed and keep_ends and i in (0, K):
            out.append(P[0] if i == 0 else P[-1])
            continue
        j = min(np.searchsorted(s, st, side="right") - 1, len(P) - 2)
        w = (st - s[j]) / seg[j] if seg[j] > 0 else 0.0
        pred = (1 - w) * P[j] + w * P[j + 1]
        t = P[j + 1] - P[j]
        t = t / np.linalg.norm(t)
        q, ok = correct(ev, pred, t)
        if not ok:
            raise ContinuationStalled(f"could not correct resampled point {i}")
        out.append(q)
    return np.array(out), L


def _residual(ev, pts):
    F, _ = ev.float_F(pts, deriv=False)
    return float(np.max(np.abs(F)))


def loop_seeds(ev, segments, candidates, rmax=0.9, h=2e-3, max_candidates=40):
    """Closed chain through the first candidate whose curve closes inside the disks."""
    for q0 in candidates[:max_candidates]:
        try:
            pts, status, _ = trace(ev, q0, np.ones(ev.dim_in), h=h, rmax=rmax, closed=True)
        except ContinuationStalled:
            continue
        if status != "closed":
            continue
        chain, L = resample(ev, pts, segments, closed=True)
        return SeedChain(chain, True, L, _residual(ev, chain))
    raise NoSeedFound("no closed zero curve found among the candidates")


def arc_seeds(ev, segments, candidates, B, m=3, rmax=0.9, h=2e-3, avoid=None, max_candidates=40,
              avoid_tol=1e-4):
    """Open chain from ``z`` to ``B^m z`` (``B`` float 4x4 linear dynamics).

    ``avoid`` is a list of earlier chains; candidates lying on ``B^i`` images
    of those chains are skipped.
    """
    Bm = np.linalg.matrix_power(B, m)
    Bmi = np.linalg.inv(Bm)
    if avoid:
        candidates = candidates[~near_images(candidates, avoid, B, m, avoid_tol)]
    for q0 in candidates[:max_candidates]:
        tgt = np.stack([Bm @ q0, Bmi @ q0])
        usable = _in_disks(tgt, rmax)
        if not np.any(usable):
            continue
        labels = np.nonzero(usable)[0]
        tgt = tgt[usable]
        for sgn in (1.0, -1.0):
            try:
                pts, status, which = trace(ev, q0, sgn * np.ones(ev.dim_in), h=h, rmax=rmax,
                                           target=tgt, closed=False)
            except ContinuationStalled:
                continue
            if status != "target":
                continue
            end, ok = correct(ev, tgt[which], _unit(pts[-1] - pts[-2]))
            if not ok:
                continue
            pts = np.vstack([pts, end[None]])
            if labels[which] == 1:
                # reached B^{-m} z: reverse so the chain runs from B^{-m} z to z
                pts = pts[::-1]
            chain, L = resample(ev, pts, segments, closed=False)
            return SeedChain(chain, False, L, _residual(ev, chain))
    raise NoSeedFound("no arc from z to B^m z found among the candidates")


def _unit(v):
    return v / np.linalg.norm(v)


def near_images(points, chains, B, m, tol, span=4):
    """Mask of ``points`` lying on ``B^i`` images (|i| <= span m) of the given chains."""
    from scipy.spatial import cKDTree

    mask = np.zeros(len(points), bool)
    Binv = np.linalg.inv(B)
    for c in chains:
        for i in range(-span * m, span * m + 1):
            M = np.linalg.matrix_power(B, i) if i >= 0 else np.linalg.matrix_power(Binv, -i)
            Q = c.points @ M.T
            if not np.any(_in_disks(Q, 1.0)):
                continue
            # the polyline spacing bounds the distance from a curve point to a vertex
            h = np.max(np.linalg.norm(np.diff(Q, axis=0), axis=1))
            d, _ = cKDTree(Q).query(points)
            mask |= d < h + tol
    return mask


def order_candidates(zeros, prefer):
    """Deterministic candidate order: closest (|theta|, |phi|) to ``prefer`` first."""
    r = np.stack([np.hypot(zeros[:, 0], zeros[:, 1]), np.hypot(zeros[:, 2], zeros[:, 3])], 1)
    key = np.linalg.norm(r - np.asarray(prefer)[None], axis=1)
    return zeros[np.lexsort((zeros[:, 0], key))]


def circle_seeds(K):
    th = 2 * np.pi * np.arange(K) / K
    pts = np.stack([np.cos(th), np.sin(th)], 1)
    return SeedChain(pts, True, 2 * np.pi, 0.0)
