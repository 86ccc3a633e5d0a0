"""End-to-end orchestration: charts, seeds, chain validation and artifacts.

Every output file is a function of the configuration only (no timings, fixed
random seeds, fixed evaluation chunks), so reruns are byte-for-byte identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .curve import (ChainValidator, CircleProblem, closure_matrix, make_pool, propagate_inner)
from .errors import ValidationError
from .interval import exp_neg
from .lohner import HeteroclinicProblem
from .lomeli import LomeliMap, LomeliParams, fixed_points
from .manifold import build_chart
from .seeds import SeedChain, arc_seeds, loop_seeds, order_candidates, sample_zeros

log = logging.getLogger(__name__)

FORMAT = "hetproof-certificate/1"
CASES = ("loop", "arc1", "arc2", "toy-circle")


@dataclass
class CaseConfig:
    case: str
    kind: str = "fundamental_loop"
    problem: str = "lomeli"
    params: LomeliParams | None = None
    l1: int = 9
    l2: int = 9
    order: int = 45
    target_delta: float = 1e-10
    sigma: float = 0.05
    segments: int = 1000
    scaling: dict = field(default_factory=lambda: {"unstable": 1.0, "stable": 1.0})
    seeds: dict = field(default_factory=dict)
    fold: int = 1
    arc_index: int = 0
    inner_steps: tuple = (-6, 6)
    max_depth: int = 6
    out: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("l1 and l2 must be non-negative")
        if self.order < 2:
            raise ValueError("chart order must be at least 2")
        if self.segments < 3:
            raise ValueError("need at least 3 segments")

    def to_json(self):
        return {"case": self.case, "kind": self.kind, "problem": self.problem,
                "params": self.params.to_dict() if self.params is not None else None,
                "l1": self.l1, "l2": self.l2, "order": self.order, "target_delta": repr(float(self.target_delta)),
                "sigma": repr(float(self.sigma)), "segments": self.segments, "scaling": self.scaling,
                "seeds": self.seeds, "fold": self.fold, "arc_index": self.arc_index,
                "inner_steps": list(self.inner_steps), "max_depth": self.max_depth}


def default_config_path():
    return str(resources.files("hetproof") / "configs" / "cases.json")


def load_config(path, case, **overrides) -> CaseConfig:
    """Merge the file's defaults with the case entry and non-None overrides."""
    path = path or default_config_path()
    with open(path) as fh:
        data = json.load(fh)
    if case not in data.get("cases", {}):
        raise KeyError(f"case {case!r} not in {path}")
    merged = dict(data.get("defaults", {}))
    merged.update(data["cases"][case])
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged["case"] = case
    if merged.get("params") is not None:
        merged["params"] = LomeliParams.from_dict(merged["params"])
    if "inner_steps" in merged:
        merged["inner_steps"] = tuple(merged["inner_steps"])
    for key in ("target_delta", "sigma"):
        if key in merged:
            merged[key] = float(merged[key])
    known = set(CaseConfig.__dataclass_fields__)
    return CaseConfig(**{k: v for k, v in merged.items() if k in known})


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------
def build_problem(cfg: CaseConfig, backend=None):
    """``(evaluator, charts or None, fixed points or None)``."""
    if cfg.problem == "circle":
        return CircleProblem(), None, None
    fu, fs = fixed_points(cfg.params)
    cu = build_chart(fu, cfg.params, cfg.order, cfg.scaling["unstable"], target_delta=cfg.target_delta,
                     sigma=cfg.sigma)
    cs = build_chart(fs, cfg.params, cfg.order, cfg.scaling["stable"], target_delta=cfg.target_delta,
                     sigma=cfg.sigma)
    prob = HeteroclinicProblem(LomeliMap(cfg.params), cu, cs, cfg.l1, cfg.l2, backend=backend)
    return prob, (cu, cs), (fu, fs)


def find_seeds(cfg: CaseConfig, prob, charts=None) -> SeedChain:
    """Floating chain of zeros: closed for loops, ``z -> B^m z`` for arcs."""
    sd = cfg.seeds
    if cfg.problem == "circle":
        Z = sample_zeros(prob, n=int(sd.get("samples", 64)), box=1.5, seed=int(sd.get("seed", 0)))
        Z = Z[np.lexsort((Z[:, 1], Z[:, 0]))]
        return loop_seeds(prob, cfg.segments, Z, h=float(sd.get("h", 0.05)))
    rmax = float(sd.get("rmax", 0.9))
    Z = sample_zeros(prob, n=int(sd.get("samples", 20000)), rmax=rmax, seed=int(sd.get("seed", 0)))
    C = order_candidates(Z, sd.get("prefer", (0.5, 0.5)))
    if cfg.kind == "fundamental_loop":
        return loop_seeds(prob, cfg.segments, C, rmax=rmax)
    B = closure_matrix(*charts).mid()
    found = []
    for _ in range(cfg.arc_index + 1):
        found.append(arc_seeds(prob, cfg.segments, C, B, m=cfg.fold, rmax=rmax, avoid=found or None))
    return found[-1]


def validate_curve(cfg: CaseConfig, prob, seeds: SeedChain, charts=None, pool=None):
    B = closure_matrix(*charts) if charts is not None else None
    m = cfg.fold if cfg.kind == "m_fold_arc" else 1
    cv = ChainValidator(prob, cfg.kind, B=B, m=m, max_depth=cfg.max_depth, pool=pool)
    return cv.run(seeds.points)


def inner_images(cfg: CaseConfig, cert, charts):
    if charts is None:
        return []
    cu, cs = charts
    B = closure_matrix(cu, cs)
    r_u = float(exp_neg(cu.sigma).lo)
    r_s = float(exp_neg(cs.sigma).lo)
    lo, hi = cfg.inner_steps
    return propagate_inner(cert, B, range(lo, hi + 1), r_u, r_s)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------
def _segments_csv(cert):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = cert.segments[0].p_star.shape[0]
    head = ["segment", "pass", "transversal"]
    for j in range(m):
        head += [f"x{j}_lo", f"x{j}_hi"]
    head += ["Y_rad", "newton_rad"]
    w.writerow(head)
    for s in cert.segments:
        T = s.tube()
        row = [s.index, int(s.passed), int(s.transversal)]
        for j in range(m):
            row += [repr(float(T.lo[j])), repr(float(T.hi[j]))]
        row += [repr(float(s.Y.rad().max())), repr(float(s.newton_image.rad().max()))]
        w.writerow(row)
    return buf.getvalue()


def _inner_csv(images):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "path", "segment", "rigorous", "theta_s_lo", "theta_s_hi", "theta_t_lo", "theta_t_hi",
                "phi_s_lo", "phi_s_hi", "phi_t_lo", "phi_t_hi"])
    for im in images:
        row = [im.step, im.path, im.segment, int(im.rigorous)]
        for j in range(4):
            row += [repr(float(im.box.lo[j])), repr(float(im.box.hi[j]))]
        w.writerow(row)
    return buf.getvalue()


def inner_summary(images):
    rig = [im for im in images if im.rigorous]
    paths = sorted({im.path for im in rig})
    steps = sorted({im.step for im in rig})
    by_step = {}
    for im in images:
        by_step.setdefault(im.step, []).append(im.rigorous)
    complete = sorted(j for j, flags in by_step.items() if all(flags))
    return {"paths": paths, "n_paths": len(paths), "rigorous_images": len(rig), "images": len(images),
            "rigorous_steps": steps, "complete_steps": complete}


def _summary_text(cfg, cert, seeds, charts, inner):
    lines = [f"case: {cfg.case}", f"kind: {cert.kind} (m = {cert.m})"]
    if cfg.params is not None:
        p = cfg.params.to_dict()
        lines.append("parameters: " + ", ".join(f"{k} = {v}" for k, v in p.items()))
        lines.append(f"iterates: l1 = {cfg.l1}, l2 = {cfg.l2}")
    if charts is not None:
        for name, ch in zip(("unstable", "stable"), charts):
            lam = ch.eig
            lines.append(f"{name} chart: order {ch.order}, scaling {ch.scaling!r}, delta {ch.tail_delta:.3e}, "
                         f"lambda in [{float(lam.re.lo)!r}, {float(lam.re.hi)!r}] + i[{float(lam.im.lo)!r}, "
                         f"{float(lam.im.hi)!r}]")
    lines.append(f"seeds: {len(seeds.points)} points, length {seeds.length:.6f}, residual {seeds.residual:.1e}")
    n = len(cert.segments)
    ok = sum(s.passed for s in cert.segments)
    lines.append(f"segments: {ok}/{n} pass directed Newton inclusion; bisections {cert.meta.get('bisections', 0)}")
    lines.append(f"max |Y| radius {max(float(s.Y.rad().max()) for s in cert.segments):.3e}")
    lines.append(f"closure: {cert.closure['type']} verified = {cert.closure['verified']}")
    if inner:
        lines.append(f"inner dynamics: {inner['n_paths']} path(s), {inner['rigorous_images']} rigorous images "
                     f"of {inner['images']}")
    lines.append("RESULT: " + ("PROVED" if cert.passed else "FAILED"))
    return "\n".join(lines) + "\n"


def write_artifacts(cfg, outdir, cert, seeds, charts, fps, images):
    os.makedirs(outdir, exist_ok=True)
    inner = inner_summary(images) if images else None
    doc = {"format": FORMAT, "case": cfg.case, "config": cfg.to_json(), "kind": cert.kind, "m": cert.m,
           "problem": cfg.problem}
    if charts is not None:
        cu, cs = charts
        files = {}
        for name, ch in (("unstable", cu), ("stable", cs)):
            fname = f"chart_{name}.json"
            _dump(os.path.join(outdir, fname), ch.to_json())
            files[name] = {"file": fname, "delta": repr(float(ch.tail_delta))}
        doc["params"] = cfg.params.to_dict()
        doc["l1"], doc["l2"] = cfg.l1, cfg.l2
        doc["fixed_points"] = {"unstable": fps[0].to_json(), "stable": fps[1].to_json()}
        doc["charts"] = files
    doc["seeds"] = {"count": int(len(seeds.points)), "length": repr(float(seeds.length)),
                    "residual": repr(float(seeds.residual)),
                    "spacing": {k: repr(v) for k, v in seeds.spacing.items()}}
    doc["curve"] = cert.to_json()
    if inner is not None:
        doc["inner"] = dict(inner, file="inner.csv", steps=list(cfg.inner_steps))
        with open(os.path.join(outdir, "inner.csv"), "w") as fh:
            fh.write(_inner_csv(images))
    doc["status"] = "pass" if cert.passed else "fail"
    _dump(os.path.join(outdir, "certificate.json"), doc)
    with open(os.path.join(outdir, "segments.csv"), "w") as fh:
        fh.write(_segments_csv(cert))
    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write(_summary_text(cfg, cert, seeds, charts, inner))
    return doc


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def write_failure(outdir, cfg, stage, exc):
    os.makedirs(outdir, exist_ok=True)
    rep = {"format": FORMAT, "case": cfg.case, "status": "fail", "stage": stage,
           "error": type(exc).__name__, "message": str(exc)}
    img = getattr(exc, "image", None)
    if img is not None:
        rep["newton_image"] = img.to_json()
        rep["Y"] = exc.Y.to_json() if getattr(exc, "Y", None) is not None else None
    _dump(os.path.join(outdir, "failure.json"), rep)
    return rep


def run_case(cfg: CaseConfig, outdir=None, backend=None, echo=print):
    """Run every stage; returns ``(ok, document)``.  Errors produce ``failure.json``."""
    outdir = outdir or os.path.join(cfg.out, cfg.case)
    stage = "setup"
    pool = None
    t0 = time.perf_counter()
    try:
        stage = "charts"
        prob, charts, fps = build_problem(cfg, backend=backend)
        if charts is not None:
            echo(f"[{cfg.case}] charts: delta_u {charts[0].tail_delta:.2e}, delta_s {charts[1].tail_delta:.2e} "
                 f"({time.perf_counter() - t0:.1f} s)")
        stage = "seeds"
        seeds = find_seeds(cfg, prob, charts)
        echo(f"[{cfg.case}] seeds: {len(seeds.points)} points ({time.perf_counter() - t0:.1f} s)")
        stage = "curve"
        pool = make_pool(prob, cfg.jobs)
        cert = validate_curve(cfg, prob, seeds, charts, pool=pool)
        echo(f"[{cfg.case}] curve: {len(cert.segments)} segments, closure {cert.closure['verified']} "
             f"({time.perf_counter() - t0:.1f} s)")
        stage = "inner"
        images = inner_images(cfg, cert, charts)
        stage = "write"
        doc = write_artifacts(cfg, outdir, cert, seeds, charts, fps, images)
    except ValidationError as exc:
        rep = write_failure(outdir, cfg, stage, exc)
        echo(f"[{cfg.case}] FAILED at {stage}: {type(exc).__name__}: {exc}")
        return False, rep
    finally:
        if pool is not None:
            pool.shutdown()
    echo(f"[{cfg.case}] {'PROVED' if doc['status'] == 'pass' else 'FAILED'} in {time.perf_counter() - t0:.1f} s")
    return doc["status"] == "pass", doc
