"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the hot kernels (Haar analysis/synthesis levels, full-depth transforms,
complex soft threshold) on solver-sized batches under both backends and
prints a table.  The numpy backend is selected by re-executing this script
with WAVEGEC_DISABLE_NUMBA=1, so each run measures one backend cleanly.

Usage:  python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np


def timeit(fn, *args, repeat=50):
    fn(*args)   # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def run_cases():
    from wavegec import _kernels, transforms as tr

    rng = np.random.default_rng(0)
    batch = rng.standard_normal((14, 256, 256)) + 1j * rng.standard_normal((14, 256, 256))
    flat = np.ascontiguousarray(batch[0].ravel())
    thresholds = np.abs(rng.standard_normal(flat.size)) * 0.5
    pyr = tr.dwt2_haar(batch, 4)

    cases = {
        "haar_analysis_level (14x256x256)":
            timeit(_kernels.haar_analysis_level, batch),
        "dwt2_haar depth 4 (14x256x256)":
            timeit(lambda b: tr.dwt2_haar(b, 4), batch),
        "idwt2_haar depth 4 (14x256x256)":
            timeit(tr.idwt2_haar, pyr),
        "soft_threshold (65536 coeffs)":
            timeit(_kernels.soft_threshold_flat, flat, thresholds),
    }
    return _kernels.USING_NUMBA, cases


def main():
    if os.environ.get("_BENCH_CHILD") == "1":
        using_numba, cases = run_cases()
        print(json.dumps({"numba": using_numba, "cases": cases}))
        return

    results = {}
    for disable in ("0", "1"):
        env = dict(os.environ, WAVEGEC_DISABLE_NUMBA=disable, _BENCH_CHILD="1")
        out = subprocess.run([sys.executable, __file__], env=env,
                             capture_output=True, text=True, check=True)
        payload = json.loads(out.stdout.strip().splitlines()[-1])
        key = "numba" if payload["numba"] else "numpy"
        results[key] = payload["cases"]

    if "numba" not in results:
        print("numba unavailable; numpy-only timings:")
        for name, t in results["numpy"].items():
            print(f"  {name:42s} {1e3 * t:8.3f} ms")
        return

    print(f"{'kernel':42s} {'numba':>10s} {'numpy':>10s} {'speedup':>9s}")
    for name in results["numba"]:
        tn = results["numba"][name]
        tp = results["numpy"][name]
        print(f"{name:42s} {1e3 * tn:8.3f}ms {1e3 * tp:8.3f}ms {tp / tn:8.2f}x")


if __name__ == "__main__":
    main()
