"""Per-call latency of the streaming step functions."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import _backend
from ..actuator_sim import NoiseSpec, simulate
from ..filter_core import VALVE_FILTER
from ..integral_estimator import IntegralConfig, reset_flags_from_drive

MIN_ITERATIONS = 10_000


@dataclass(frozen=True)
class LatencyStats:
    median_ns: float
    p99_ns: float
    iterations: int

    @property
    def median_us(self):
        return self.median_ns / 1e3

    @property
    def p99_us(self):
        return self.p99_ns / 1e3


@dataclass(frozen=True)
class BenchResult:
    """Streaming per-call latency, plus per-sample cost inside the batch loops.

    The batch figures exclude interpreter call overhead and so reflect the
    arithmetic of each estimator.
    """

    backend: str
    filter: LatencyStats
    integral: LatencyStats
    filter_batch_ns: float = float("nan")
    integral_batch_ns: float = float("nan")


def _synthetic_stream():
    # noisy valve record: realistic mix of HQ/LQ steps and reset events
    tr = simulate(noise=NoiseSpec(VALVE_FILTER.v_noise_std, VALVE_FILTER.i_noise_std), seed=12345)
    reset = reset_flags_from_drive(tr.v)
    return tr.u[1:].tolist(), tr.iota[1:].tolist(), [bool(x) for x in reset[1:]], float(tr.iota[0])


def _time_batches(call_batch, iterations, batch):
    n_batches = max(1, iterations // batch)
    per_call = np.empty(n_batches)
    clock = time.perf_counter_ns
    for b in range(n_batches):
        t0 = clock()
        call_batch(b)
        per_call[b] = (clock() - t0) / batch
    return LatencyStats(float(np.median(per_call)), float(np.percentile(per_call, 99)), n_batches * batch)


def bench_step(iterations=1_000_000, batch=100, backend=None) -> BenchResult:
    """Median and p99 wall time per call of ``filter_step`` and ``integral_step``.

    Calls are timed in batches of ``batch`` consecutive samples (one clock
    read per batch), so the statistics are over per-batch means.  The input
    cycles through a simulated noisy valve record.
    """
    iterations = int(iterations)
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"iterations must be >= {MIN_ITERATIONS}, got {iterations}")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    kern = _backend.get_kernels(backend)
    us, iotas, resets, iota0 = _synthetic_stream()
    n = len(us) - len(us) % batch
    chunks = [(us[a:a + batch], iotas[a:a + batch], resets[a:a + batch]) for a in range(0, n, batch)]
    n_chunks = len(chunks)

    state = kern.SemeraKernel(*VALVE_FILTER.kernel_args())
    step = kern.filter_step
    step(state, 0.0, iota0)

    def filter_batch(b):
        cu, ci, _ = chunks[b % n_chunks]
        for u, i in zip(cu, ci):
            step(state, u, i)

    f_stats = _time_batches(filter_batch, iterations, batch)

    istate = kern.IntegralKernel(*IntegralConfig.from_filter(VALVE_FILTER).kernel_args())
    istep = kern.integral_step
    istep(istate, 0.0, iota0, True)

    def integral_batch(b):
        cu, ci, cr = chunks[b % n_chunks]
        for u, i, r in zip(cu, ci, cr):
            istep(istate, u, i, r)

    i_stats = _time_batches(integral_batch, iterations, batch)
    f_batch, i_batch = _batch_cost(kern, iterations)
    return BenchResult(kern.BACKEND, f_stats, i_stats, f_batch, i_batch)


def _batch_cost(kern, iterations, repeats=5):
    """Best-of-``repeats`` nanoseconds per sample of the kernels' batch loops."""
    us, iotas, resets, iota0 = _synthetic_stream()
    # capped so the pure-Python fallback stays quick
    reps = max(1, min(iterations, 200_000) // len(us))
    u = np.ascontiguousarray(np.tile(np.r_[0.0, us], reps))
    iota = np.ascontiguousarray(np.tile(np.r_[iota0, iotas], reps))
    reset = np.ascontiguousarray(np.tile(np.r_[1, np.array(resets, dtype=np.int8)], reps).astype(np.int8))
    n = len(u)
    outs = [np.empty(n), np.empty(n), np.empty(n), np.empty(n, dtype=np.int8)]
    icfg = IntegralConfig.from_filter(VALVE_FILTER)
    best_f = best_i = float("inf")
    clock = time.perf_counter_ns
    for _ in range(repeats):
        k = kern.SemeraKernel(*VALVE_FILTER.kernel_args())
        t0 = clock()
        k.run(u, iota, *outs)
        best_f = min(best_f, (clock() - t0) / n)
        k = kern.IntegralKernel(*icfg.kernel_args())
        t0 = clock()
        k.run(u, iota, reset, *outs)
        best_i = min(best_i, (clock() - t0) / n)
    return best_f, best_i
