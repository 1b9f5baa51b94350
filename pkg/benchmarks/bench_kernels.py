"""Time the numba kernels against their pure-numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]

The fallback is selected by ``FLL_NO_JIT=1``; the flag is read on every
kernel call, so both paths are timed in one process. Outputs are checked
for equality before timings are reported.
"""
from __future__ import annotations

import argparse
import os
import time
from contextlib import contextmanager

import numpy as np

from fractal_levelsets.holder import AuxiliaryFunction
from fractal_levelsets.ifs import GridSpec, attractor_levels, sierpinski_gasket


@contextmanager
def jit_mode(enabled: bool):
    old = os.environ.get("FLL_NO_JIT")
    os.environ["FLL_NO_JIT"] = "0" if enabled else "1"
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("FLL_NO_JIT", None)
        else:
            os.environ["FLL_NO_JIT"] = old


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_covers(repeat: int):
    system = sierpinski_gasket()
    spec = GridSpec.for_system(system, 6)
    fn = lambda: attractor_levels(system, spec, range(2, 6), workers=1)  # noqa: E731
    with jit_mode(True):
        fn()  # compile
        t_jit, a = best_of(fn, repeat)
    with jit_mode(False):
        t_np, b = best_of(fn, repeat)
    assert all(a[k] == b[k] for k in a), "cover mismatch between paths"
    return "attractor_levels(gasket, base 6, k=2..5)", t_jit, t_np


def bench_phi(repeat: int):
    aux = AuxiliaryFunction(3, 2)
    x = np.random.default_rng(0).uniform(0, 1, 1_000_000)
    with jit_mode(True):
        aux(x[:10])  # compile
        t_jit, a = best_of(lambda: aux(x), repeat)
    with jit_mode(False):
        t_np, b = best_of(lambda: aux(x), repeat)
    assert np.array_equal(a, b), "phi mismatch between paths"
    return "phi_{3,2} at 1e6 points", t_jit, t_np


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':45s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for bench in (bench_covers, bench_phi):
        name, t_jit, t_np = bench(args.repeat)
        print(f"{name:45s} {t_jit:10.4f} {t_np:10.4f} {t_np / t_jit:8.1f}x")


if __name__ == "__main__":
    main()
