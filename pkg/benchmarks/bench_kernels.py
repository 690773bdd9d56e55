#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times each hot kernel (3x3 blur, 3x3 morphology, projective warp) on a
300x300 frame for both backends, checks the outputs stay bit-identical,
then measures the full onboard pipeline in a fresh subprocess per backend
(the backend is chosen at import time, so it cannot be swapped in-process).

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from agvlab.kernels import _pure

try:
    from agvlab.kernels import _core
except ImportError:
    _core = None

PIPELINE_SNIPPET = """
import json, time
import numpy as np
from agvlab import simworld as sw
from agvlab.navigation import NavConfig, run_onboard_pipeline
import agvlab.kernels as k

cfg = NavConfig()
scene = sw.default_scene(seed=3)
src = scene.track.source
frame = sw.render_onboard(scene, sw.Pose2D(src.pos[0], src.pos[1],
                                           np.pi / 2), cfg)
run_onboard_pipeline(frame, cfg)
repeats = {repeats}
t0 = time.perf_counter()
for _ in range(repeats):
    run_onboard_pipeline(frame, cfg)
print(json.dumps({{"backend": k.BACKEND,
                   "seconds": (time.perf_counter() - t0) / repeats}}))
"""


def time_call(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def pipeline_seconds(pure: bool, repeats: int) -> float:
    env = dict(os.environ, AGVLAB_PURE="1" if pure else "0")
    out = subprocess.run(
        [sys.executable, "-c", PIPELINE_SNIPPET.format(repeats=repeats)],
        env=env, capture_output=True, text=True, check=True)
    rec = json.loads(out.stdout)
    assert rec["backend"] == ("pure" if pure else "compiled"), rec
    return rec["seconds"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=300,
                    help="calls per measurement (default 300)")
    args = ap.parse_args()

    if _core is None:
        print("compiled extension not built; nothing to compare against")
        return 1

    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, (300, 300), dtype=np.uint8)
    bits = (frame > 128).astype(np.uint8)
    hinv = np.array([[1.01, 0.02, -3.0],
                     [-0.015, 0.99, 2.0],
                     [1e-5, -2e-5, 1.0]])

    cases = [
        ("blur3 300x300", lambda b: b.blur3(frame)),
        ("morph3 erode 300x300", lambda b: b.morph3(bits, True)),
        ("morph3 dilate 300x300", lambda b: b.morph3(bits, False)),
        ("warp 300x300 projective",
         lambda b: b.warp_bilinear(frame, hinv, 300, 300, 0)),
    ]

    print(f"{'kernel':<28}{'compiled':>12}{'pure':>12}{'speedup':>10}")
    for name, call in cases:
        assert np.array_equal(call(_core), call(_pure)), \
            f"{name}: backends disagree"
        tc = time_call(lambda: call(_core), args.repeats)
        tp = time_call(lambda: call(_pure), args.repeats)
        print(f"{name:<28}{tc * 1e3:>10.3f}ms{tp * 1e3:>10.3f}ms"
              f"{tp / tc:>9.1f}x")

    tc = pipeline_seconds(pure=False, repeats=args.repeats)
    tp = pipeline_seconds(pure=True, repeats=args.repeats)
    print(f"{'onboard pipeline':<28}{tc * 1e3:>10.3f}ms{tp * 1e3:>10.3f}ms"
          f"{tp / tc:>9.1f}x")
    print(f"pipeline throughput: {1 / tc:.0f} fps compiled, "
          f"{1 / tp:.0f} fps pure")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
