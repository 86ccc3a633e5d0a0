"""Independent re-verification of an emitted certificate.

Only the stored enclosures are trusted as data.  The checker recomputes the
fixed points and the formal chart coefficients (deterministic interval code),
requires them to lie in the stored enclosures, re-validates the tails with the
stored bounds and re-runs every point and segment Newton inclusion together
with the chain closure.  No seeds are recomputed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .curve import (CurveCertificate, CircleProblem, check_chain, closure_matrix, matrix_power,
                    point_newton, segment_newton)
from .errors import ValidationError
from .interval import Interval, matmul, stack
from .lohner import HeteroclinicProblem
from .lomeli import LomeliMap, LomeliParams, fixed_points
from .manifold import chart_from_json, rescale, solve_homological, validate_tail, validation_values


@dataclass
class CheckReport:
    path: str
    items: list = field(default_factory=list)

    def add(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))
        return ok

    @property
    def ok(self):
        return bool(self.items) and all(ok for _, ok, _ in self.items)

    def lines(self):
        return [f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
                for name, ok, detail in self.items]


def _same(a: Interval, b: Interval):
    return np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)


def _subset(inner: Interval, outer: Interval):
    return bool(np.all(outer.lo <= inner.lo) and np.all(inner.hi <= outer.hi))


def check_chart(data, params, fp, rep: CheckReport, name):
    """Rebuild the formal coefficients and re-validate the stored tail bound."""
    chart = chart_from_json(data, params, fp)
    ref = solve_homological(fp, chart.order, chart.base_scaling, params, kind=chart.kind)
    for f in chart.rescales:
        ref = rescale(ref, f)
    inside = _subset(ref.coeffs.re, chart.coeffs.re) and _subset(ref.coeffs.im, chart.coeffs.im)
    rep.add(f"{name} chart coefficients enclose the recomputed formal solution", inside)
    rep.add(f"{name} eigenvalue enclosure contains the verified eigenvalue",
            _subset(fp.eigenvalue_pair.re, chart.eig.re) and _subset(fp.eigenvalue_pair.im, chart.eig.im))
    delta = chart.tail_delta
    try:
        vv = validation_values(chart)
        tc = validate_tail(chart, vv, store=False)
        ok = tc.c2 < delta < tc.c1
        rep.add(f"{name} tail bound delta = {delta:.3e} lies in the window (c2, c1)", ok,
                f"c2 = {tc.c2:.3e}, c1 = {tc.c1:.3e}")
    except ValidationError as exc:
        rep.add(f"{name} tail validation", False, f"{type(exc).__name__}: {exc}")
    chart.tail_delta = delta
    return chart


def check_curve(ev, cert: CurveCertificate, rep: CheckReport, B=None):
    segs = cert.segments
    pts = cert.points
    n = len(segs)
    rep.add("certificate lists one point per segment", len(pts) == n, f"{len(pts)} points, {n} segments")
    if len(pts) != n:
        return
    # points
    Yp = stack([p.Y for p in pts], 0)
    axes = np.array([p.axis for p in pts])
    xs = np.array([p.x_fixed for p in pts])
    N, ok = point_newton(ev, axes, xs, Yp)
    good = ok & np.all(Yp.interior_contains(N), -1)
    rep.add("every point enclosure satisfies N subset int Y", good.all(), f"{int(good.sum())}/{n}")
    starts = all(_same(s.p_star, p.box()) for s, p in zip(segs, pts))
    rep.add("segments start at the validated point enclosures", starts)
    # segments
    P = stack([s.p_star for s in segs], 0)
    A1 = stack([s.A1 for s in segs], 0)
    A2 = np.stack([s.A2 for s in segs])
    Y = stack([s.Y for s in segs], 0)
    Pn = stack([s.p_next for s in segs], 0)
    rep.add("A1 encloses p*_{n+1} - p*_n", _subset(Pn - P, A1))
    Nn, Dq, okn = segment_newton(ev, P, A1, A2, Y)
    inner = okn & np.all(Y.interior_contains(Nn), -1) & np.all(Y.interior_contains(0.0), -1)
    bad = np.nonzero(~inner)[0]
    rep.add("every segment satisfies the directed Newton inclusion N subset int Y with 0 in int Y",
            inner.all(), f"{int(inner.sum())}/{n}" + (f", first failure {int(bad[0])}" if len(bad) else ""))
    rep.add("DF A2 verified invertible on every tube (transversality)", okn.all())
    try:
        check_chain(segs, cert.kind)
        rep.add("chain is connected" + (" and closes" if cert.kind == "fundamental_loop" else ""), True)
    except ValidationError as exc:
        rep.add("chain is connected", False, str(exc))
    if cert.kind == "m_fold_arc":
        Bm = matrix_power(B, cert.m)
        image = matmul(Bm, segs[0].p_star[:, None])[:, 0]
        rep.add(f"B^{cert.m} p*_1 is contained in the last endpoint enclosure", _subset(image, segs[-1].p_next))


def check_certificate(path) -> CheckReport:
    rep = CheckReport(path)
    with open(path) as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    cert = CurveCertificate.from_json(doc["curve"])
    rep.add("certificate reports pass", doc.get("status") == "pass")
    if doc.get("problem") == "circle":
        check_curve(CircleProblem(), cert, rep)
        return rep
    params = LomeliParams.from_dict(doc["params"])
    fu, fs = fixed_points(params)
    charts = []
    for name, fp in (("unstable", fu), ("stable", fs)):
        with open(os.path.join(base, doc["charts"][name]["file"])) as fh:
            data = json.load(fh)
        charts.append(check_chart(data, params, fp, rep, name))
    cu, cs = charts
    ev = HeteroclinicProblem(LomeliMap(params), cu, cs, int(doc["l1"]), int(doc["l2"]))
    B = closure_matrix(cu, cs)
    check_curve(ev, cert, rep, B)
    return rep
