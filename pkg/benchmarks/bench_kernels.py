"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20] [--end-to-end]

Kernels are timed in-process after a warm-up call (so numba compilation is
excluded). ``--end-to-end`` also times one slow-kill fit on the regression preset
dimensions in two subprocesses, with and without SLOWKILL_DISABLE_NUMBA.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from slowkill import _accel


def _time(fn, repeat):
    fn()  # warm-up / compile
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    scores = rng.standard_normal(5000) ** 2
    z = rng.standard_normal((150, 5000))
    d = rng.standard_normal(5000)
    return [
        ("select_top p=5000 k=2500", lambda f: f(scores, 2500), _accel.select_top_numpy, _accel.select_top_numba),
        ("select_top p=5000 k=15", lambda f: f(scores, 15), _accel.select_top_numpy, _accel.select_top_numba),
        ("ar1_rows 150x5000", lambda f: f(z, 0.9), _accel.ar1_rows_numpy, _accel.ar1_rows_numba),
        ("toeplitz_matvec p=5000", lambda f: f(d, 0.9), _accel.toeplitz_matvec_numpy, _accel.toeplitz_matvec_numba),
    ]


END_TO_END = """
import time
from slowkill import Problem, SolverConfig, fit, BACKEND
from slowkill.bench import SyntheticSpec, gen_dataset
spec = SyntheticSpec(n=150, p=5000, s=10, tau=0.9, seed=1)
d = gen_dataset(spec, 0)
fit(Problem(d.X, d.y), SolverConfig(q=15))
t = time.perf_counter()
for r in range(3):
    d = gen_dataset(spec, r)
    fit(Problem(d.X, d.y), SolverConfig(q=15))
print(BACKEND, (time.perf_counter() - t) / 3)
"""


def end_to_end():
    out = []
    for disable in ("0", "1"):
        env = dict(os.environ, SLOWKILL_DISABLE_NUMBA=disable)
        proc = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        backend, secs = proc.stdout.split()
        out.append((backend, float(secs)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)

    if not _accel.HAS_NUMBA:
        print("numba is not installed; only the numpy fallback is available")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call, np_fn, nb_fn in kernel_cases(rng):
        t_np = _time(lambda: call(np_fn), args.repeat)
        t_nb = _time(lambda: call(nb_fn), args.repeat)
        print(f"{name:<28}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.2f}x")
    if args.end_to_end:
        print("\nend-to-end fit, regression preset dimensions (seconds per replicate):")
        for backend, secs in end_to_end():
            print(f"  {backend:<8}{secs:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
