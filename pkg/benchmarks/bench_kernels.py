"""Compiled kernels against the pure Python fallback.

Runs the same workloads twice in fresh interpreters, once with numba and
once with SUPERNEUMANN_NO_NUMBA=1, and prints the timings side by side.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

LAM, P, B, C, ALPHA = -30.0, 3.0, 1.0, 1.0, 0.1


def workloads():
    from superneumann import _kernels as K
    from superneumann.numerics import DEFAULT_TOLERANCES as T
    from superneumann.sublinear import s_infinity

    s_inf = s_infinity(ALPHA, LAM, C, P)
    s_values = np.linspace(0.05, 0.95, 200) * s_inf
    e_levels = np.linspace(-0.9, -0.05, 200) * 225.0 / 2.0

    def shots():
        K.shoot_many(LAM, C, P, s_values, ALPHA, T.shoot_rtol, T.shoot_atol, T.blowup_factor * s_inf)

    def half_laps():
        for e0 in e_levels:
            m, big_m = K.turning_min(LAM, B, P, e0), K.turning_max(LAM, B, P, e0)
            K.half_lap(LAM, B, P, m, big_m, T.quad_rtol, T.quad_atol, T.quad_limit)

    def curve_energies():
        K.curve_energy_many(LAM, B, P, C, ALPHA, s_values, T.shoot_rtol, T.shoot_atol, T.blowup_factor)

    return {"shoot_many (200 shots)": shots, "half_lap (200 levels)": half_laps,
            "curve_energy_many (200 s)": curve_energies}


def run_child(repeat):
    from superneumann._jit import USE_NUMBA

    out = {"numba": USE_NUMBA, "timings": {}}
    for name, fn in workloads().items():
        fn()  # compile or warm caches
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["timings"][name] = best
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        run_child(args.repeat)
        return
    results = {}
    for label, flag in (("numba", ""), ("python", "1")):
        env = dict(os.environ, SUPERNEUMANN_NO_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"{'kernel':<28}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name, t_jit in results["numba"]["timings"].items():
        t_py = results["python"]["timings"][name]
        print(f"{name:<28}{t_jit:>12.4g}{t_py:>12.4g}{t_py / t_jit:>10.1f}")


if __name__ == "__main__":
    main()
