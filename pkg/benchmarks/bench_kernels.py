"""Compiled vs pure-Python Lohner kernel: timing and agreement.

    python3 benchmarks/bench_kernels.py [--boxes 500] [--steps 9] [--repeat 3]
"""

import argparse
import time

import numpy as np

from hetproof import kernels
from hetproof.interval import Interval
from hetproof.lohner import initial_representation, iterate
from hetproof.lomeli import FORWARD, LomeliMap, LomeliParams, fixed_points


def setup(n_boxes, radius=1e-6, seed=1):
    params = LomeliParams.from_values("1/2", "-1/2", "1", "-0.08999", "8/10")
    fu, fs = fixed_points(params)
    rng = np.random.default_rng(seed)
    # small boxes on a segment between the two fixed points
    pu, ps = fu.point.mid(), fs.point.mid()
    s = rng.uniform(0.1, 0.9, n_boxes)[:, None]
    c = (1 - s) * pu + s * ps
    box = Interval(c - radius, c + radius)
    return LomeliMap(params), box


def run(lmap, box, steps, backend):
    S, D = initial_representation(box)
    t0 = time.perf_counter()
    S, D = iterate(lmap, S, D, steps, FORWARD, backend=backend)
    return time.perf_counter() - t0, S.enclosure(), D.enclosure(S.b)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--boxes", type=int, default=500)
    ap.add_argument("--steps", type=int, default=9)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    lmap, box = setup(args.boxes)
    names = kernels.available()
    res = {}
    for name in names:
        best = min(run(lmap, box, args.steps, name)[0] for _ in range(args.repeat))
        _, x, X = run(lmap, box, args.steps, name)
        res[name] = (best, x, X)
        print(f"{name:>9}: {best * 1e3:9.2f} ms  ({args.boxes} boxes x {args.steps} steps)")
    if len(res) == 2:
        (_, xa, Xa), (_, xb, Xb) = res["compiled"], res["python"]
        scale = np.maximum(xa.width(), 1e-300)
        dx = max(np.abs(xa.lo - xb.lo).max(), np.abs(xa.hi - xb.hi).max())
        dX = max(np.abs(Xa.lo - Xb.lo).max(), np.abs(Xa.hi - Xb.hi).max())
        print(f"  speed-up: {res['python'][0] / res['compiled'][0]:.1f}x")
        print(f"  max endpoint difference: set {dx:.2e}, derivative {dX:.2e} "
              f"(set width up to {scale.max():.2e})")
    else:
        print("  compiled extension not built; only the python kernel is available")


if __name__ == "__main__":
    main()
