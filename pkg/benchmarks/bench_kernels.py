"""Benchmark the compiled sampling kernel against the pure-python fallback.

Both consume the same uniforms, so outputs must be bit-identical; the
compiled path is what makes 1e7-step orbits cheap.

    python3 benchmarks/bench_kernels.py [L]
"""

import sys
import time

import numpy as np

from thermoshift import _fallback
from thermoshift.correlations import markov_approximation, sample_orbit
from thermoshift.kernels import USING_COMPILED, sample_path
from thermoshift.symbolic import build_system
from thermoshift.thermo import normalized_potential


def main(L=2_000_000):
    spec = {
        (0, 0): ("affine", "0.5", "0"),
        (0, 1): ("affine", "0.5", "0"),
        (1, 0): ("affine", "0.5", "0.5"),
        (1, 1): ("affine", "0.5", "0.5"),
    }
    system = build_system(2, [[1, 1], [1, 1]], spec)
    state = normalized_potential(system, 0.0, lambda x: 1 + x * x / 2, 0.0, 10)
    approx = markov_approximation(state, lambda x: 1 + x * x / 2)
    rng = np.random.default_rng(123)
    uniforms = rng.random(L)
    args = (approx.succ_state, approx.succ_cum, approx.row_start, 7, uniforms)

    t0 = time.perf_counter()
    fast = sample_path(*args)
    t_fast = time.perf_counter() - t0

    t0 = time.perf_counter()
    slow = _fallback.sample_path(*args)
    t_slow = time.perf_counter() - t0

    assert np.array_equal(fast, slow), "kernel outputs differ"
    kind = "compiled" if USING_COMPILED else "fallback (extension not built)"
    print(f"selected kernel: {kind}")
    print(f"L = {L}")
    print(f"extension : {t_fast:8.3f} s  ({L / t_fast / 1e6:6.1f} Msteps/s)")
    print(f"pure python: {t_slow:8.3f} s  ({L / t_slow / 1e6:6.1f} Msteps/s)")
    print(f"speedup    : {t_slow / t_fast:6.1f}x   (outputs bit-identical)")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000)
