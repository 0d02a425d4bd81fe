"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_backends.py [--iterations N]

Reports streaming per-call latency (median, p99) of filter_step and
integral_step, the per-sample cost inside each batch loop, the simulator's
RK4 throughput, and checks that both backends give identical results.
"""

import argparse
import time

import numpy as np

from reluctance_estimation import _backend
from reluctance_estimation.actuator_sim import VALVE_ACTUATOR, DriveWaveform, NoiseSpec, initial_state, simulate
from reluctance_estimation.filter_core import VALVE_FILTER, run_filter
from reluctance_estimation.harness.bench import bench_step


def sim_cost(backend, repeats=3):
    """Seconds to integrate one default valve record (the kernel loop only)."""
    p = VALVE_ACTUATOR
    wave = DriveWaveform()
    v = wave.sample_voltages(50e-6)
    r = np.full(len(v), p.r_true)
    outs = [np.empty(len(v)) for _ in range(3)] + [np.empty(len(v), dtype=np.int8)]
    s0 = initial_state(p)
    best = float("inf")
    for _ in range(repeats):
        kern = p.kernel(backend)
        t0 = time.perf_counter()
        kern.run(s0.lam, s0.h, s0.v_h, int(s0.mode), v, r, 50, 1e-6, *outs)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=1_000_000)
    args = ap.parse_args()

    backends = _backend.available_backends()
    rows = {}
    for name in backends:
        iters = args.iterations if name != "python" else min(args.iterations, 200_000)
        res = bench_step(iters, backend=name)
        rows[name] = (res, sim_cost(name))
        print(f"[{name}] {res.filter.iterations} calls")
        print(f"  filter_step    median {res.filter.median_us:7.3f} us  p99 {res.filter.p99_us:7.3f} us")
        print(f"  integral_step  median {res.integral.median_us:7.3f} us  p99 {res.integral.p99_us:7.3f} us")
        print(f"  batch loop     filter {res.filter_batch_ns:8.1f} ns/sample  "
              f"integral {res.integral_batch_ns:8.1f} ns/sample")
        print(f"  simulate       {rows[name][1] * 1e3:8.1f} ms per 80 ms valve record")

    if "cython" in rows:
        c, p = rows["cython"], rows["python"]
        print("speed-up (python / cython):")
        print(f"  filter_step {p[0].filter.median_ns / c[0].filter.median_ns:5.1f}x, "
              f"integral_step {p[0].integral.median_ns / c[0].integral.median_ns:5.1f}x, "
              f"filter batch {p[0].filter_batch_ns / c[0].filter_batch_ns:5.1f}x, "
              f"simulate {p[1] / c[1]:5.1f}x")
        tr = simulate(noise=NoiseSpec(15e-3, 1e-3), seed=7)
        a = run_filter(VALVE_FILTER, tr.u, tr.iota, backend="cython")
        b = run_filter(VALVE_FILTER, tr.u, tr.iota, backend="python")
        same = all(np.array_equal(x, y) for x, y in
                   ((a.r_hat, b.r_hat), (a.l_hat, b.l_hat), (a.lambda_hat, b.lambda_hat), (a.hq, b.hq)))
        print(f"backends bit-identical on a noisy valve record: {same}")


if __name__ == "__main__":
    main()
