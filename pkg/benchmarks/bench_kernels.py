"""Compiled kernels vs the pure-numpy fallback.

Each side runs in its own interpreter because the switch
(``CIO_DISABLE_NUMBA``) is read at import time.  The numba side is warmed up
first so compile time is excluded.

    python3 benchmarks/bench_kernels.py            # table
    python3 benchmarks/bench_kernels.py --json     # machine-readable
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up (triggers compilation on the numba side)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def worker(repeat):
    from cio import _kernels as K
    from cio._jit import USE_NUMBA
    from cio.cio_filter import default_process_noise, predict_kernel
    from cio.contact_solver import GRID_STEP, _scan
    from cio.environment import half_sine_weights, physics_substeps
    from cio.params import VehicleParams

    p = VehicleParams.load()
    pa = p.as_array()
    x0 = np.zeros(K.STATE_SIZE)
    x0[2] = 1.0
    x0[3] = 1.0
    u = np.zeros(K.INPUT_SIZE)
    u[0] = p.m_t * p.g
    boxes = np.array([[3.0, -5.0, 0.0, 3.1, 5.0, 3.0]])
    w = half_sine_weights(50)
    results = {}

    def physics():
        ring = np.zeros((50, 3))
        x, *_ = physics_substeps(K.MODE_ROLLOCOPTER, x0, u, pa, 1e-3, 1000, ring, 0, w, boxes, True, 0.3,
                                 0.0, 0.0, True)
        return x

    def ekf():
        xf = np.concatenate([np.zeros(3), [1.0, 0.0, 0.0, 0.0], np.zeros(6)])
        P = np.zeros((12, 12))
        Q = default_process_noise()
        a = np.array([0.05, 0.0, 9.81])
        om = np.array([0.01, -0.02, 0.03])
        for _ in range(200):
            xf, P = predict_kernel(xf, P, a, om, Q, 0.005, 9.81)
        return xf

    thetas = np.arange(-np.pi, np.pi, GRID_STEP)
    target = np.array([3.0, -4.0, -20.0, 1.0, 0.5, -0.3, 0.2, -0.1])

    def scan():
        r, _ = _scan(thetas, target, p.R, p.L, True)
        return r

    for name, fn, label in (("physics", physics, "1000 rigid-body steps with contacts"),
                            ("ekf_predict", ekf, "200 EKF predictions"),
                            ("contact_scan", scan, f"{thetas.size}-angle contact grid scan")):
        out = fn()
        results[name] = {"seconds": _best(fn, repeat), "label": label,
                         "checksum": float(np.sum(np.abs(out)))}
    return {"numba": USE_NUMBA, "results": results}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.repeat)))
        return

    runs = {}
    for disabled in ("0", "1"):
        env = dict(os.environ, CIO_DISABLE_NUMBA=disabled)
        out = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        runs["numba" if res["numba"] else "numpy"] = res["results"]

    if args.json:
        print(json.dumps(runs, indent=2))
        return
    print(f"{'kernel':<14} {'workload':<40} {'numba':>10} {'numpy':>10} {'speedup':>8}  agree")
    for name, nb in runs["numba"].items():
        py = runs["numpy"][name]
        agree = np.isclose(nb["checksum"], py["checksum"], rtol=1e-9, atol=1e-12)
        print(f"{name:<14} {nb['label']:<40} {nb['seconds'] * 1e3:8.2f}ms {py['seconds'] * 1e3:8.2f}ms "
              f"{py['seconds'] / nb['seconds']:7.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
