"""Cyclic integral estimator of flux linkage with a per-operation resistance.

The flux is the running rectangular integral of ``u - r_bar * iota``.  At the
start of each energizing operation ``r_bar`` is recomputed so that the flux
over the operation just finished returns to its reference value.  The offline
variant uses each operation's own resistance instead of the previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import _backend
from .errors import ConfigurationError, ResetDegenerateError
from .frames import EstimateSeries

__all__ = [
    "IntegralConfig",
    "IntegralState",
    "integral_init",
    "integral_step",
    "run_integral",
    "offline_estimate",
    "reset_flags_from_drive",
    "cycle_starts",
]


@dataclass(frozen=True)
class IntegralConfig:
    r0_mean: float
    l0_mean: float
    lambda0: float
    i_noise_std: float
    delta: float
    n_sigma: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise ConfigurationError(f"{f.name} must be a finite number, got {value!r}")
        if self.delta <= 0:
            raise ConfigurationError(f"delta must be > 0, got {self.delta!r}")
        if self.i_noise_std < 0 or self.n_sigma <= 0:
            raise ConfigurationError("i_noise_std must be >= 0 and n_sigma > 0")

    @classmethod
    def from_filter(cls, config, lambda0: float = 0.0) -> IntegralConfig:
        """Share priors, noise level and detector width with a FilterConfig."""
        return cls(config.r0_mean, config.l0_mean, lambda0, config.i_noise_std, config.delta, config.n_sigma)

    @property
    def threshold(self) -> float:
        return self.n_sigma * self.i_noise_std

    def kernel_args(self):
        return (self.r0_mean, self.l0_mean, self.lambda0, self.i_noise_std, self.delta, self.n_sigma)


IntegralState = _backend.kernels.IntegralKernel


def integral_init(r0_mean, l0_mean, lambda0, i_noise_std, delta, n_sigma, t0=0.0, backend=None):
    """Estimator with ``r_bar = r0_mean`` and empty sums."""
    cfg = IntegralConfig(float(r0_mean), float(l0_mean), float(lambda0), float(i_noise_std),
                         float(delta), float(n_sigma))
    return _backend.get_kernels(backend).IntegralKernel(*cfg.kernel_args(), t0=float(t0))


# Mutates ``state`` in place and returns ``(state, frame)``.  A reset is applied
# after the frame of this step is computed; on the registration sample it is a
# no-op.  Raises ResetDegenerateError when the finished cycle carried no current.
integral_step = _backend.kernels.integral_step


def _as_inputs(u, iota):
    u = np.ascontiguousarray(u, dtype=np.float64)
    iota = np.ascontiguousarray(iota, dtype=np.float64)
    if u.shape != iota.shape or u.ndim != 1:
        raise ValueError("u and iota must be 1-D arrays of equal length")
    return u, iota


def run_integral(config: IntegralConfig, u, iota, reset, t=None, backend=None) -> EstimateSeries:
    """Online estimator over a whole record; one row per sample from index 1."""
    u, iota = _as_inputs(u, iota)
    reset = np.ascontiguousarray(reset, dtype=np.int8)
    if reset.shape != u.shape:
        raise ValueError("reset must have the same length as u")
    n = len(u)
    if t is None:
        t = np.arange(n) * config.delta
    kernel = _backend.get_kernels(backend).IntegralKernel(*config.kernel_args())
    r = np.empty(n)
    l = np.empty(n)
    lam = np.empty(n)
    hq = np.empty(n, dtype=np.int8)
    kernel.run(u, iota, reset, r, l, lam, hq)
    return EstimateSeries.from_kernel_output(t, r, l, lam, hq)


def cycle_starts(reset) -> np.ndarray:
    """First sample of each operation implied by online reset flags.

    A reset at sample k closes the sums after k, so the next operation's
    first accumulated sample is k + 1.
    """
    idx = np.flatnonzero(np.asarray(reset)) + 1
    return idx[idx < len(reset)]


def offline_estimate(config: IntegralConfig, u, iota, op_boundaries, t=None) -> EstimateSeries:
    """Non-causal reference: every operation is integrated with its own resistance.

    ``op_boundaries`` are the first sample indices of the operations.  Sample 0
    only registers the first current (as in the online estimator); samples
    before the first boundary belong to the first operation.
    """
    u, iota = _as_inputs(u, iota)
    n = len(u)
    if t is None:
        t = np.arange(n) * config.delta
    t = np.asarray(t, dtype=np.float64)
    if n < 2:
        empty = np.empty(0)
        return EstimateSeries(empty, empty, empty, empty, np.empty(0, dtype=bool))

    bounds = sorted({int(b) for b in op_boundaries if 1 < int(b) < n})
    edges = [1] + bounds + [n]
    r = np.empty(n - 1)
    lam = np.empty(n - 1)
    for a, b in zip(edges[:-1], edges[1:]):
        cu = np.cumsum(u[a:b])
        ci = np.cumsum(iota[a:b])
        s_iota = ci[-1]
        if s_iota == 0.0:
            raise ResetDegenerateError(f"operation [{a}, {b}) carries no current")
        r_bar = cu[-1] / s_iota
        r[a - 1:b - 1] = r_bar
        lam[a - 1:b - 1] = config.lambda0 + config.delta * (cu - r_bar * ci)

    cur = iota[1:]
    prev = iota[:-1]
    thr = config.threshold
    hq = (np.abs(cur) > thr) & (np.abs(prev) > thr)
    l = np.full(n - 1, config.l0_mean)
    l[hq] = lam[hq] / cur[hq]
    return EstimateSeries(t[1:].copy(), r, l, lam, hq)


def reset_flags_from_drive(v, threshold=None) -> np.ndarray:
    """Reset flags at the last sample before each rising edge of a drive signal.

    ``v[k]`` is the level over the interval ending at sample k, so a flag at
    k means the next interval starts an energizing operation.  The threshold
    defaults to half the peak magnitude.
    """
    v = np.asarray(v, dtype=np.float64)
    flags = np.zeros(len(v), dtype=np.int8)
    if len(v) < 2:
        return flags
    if threshold is None:
        peak = float(np.max(np.abs(v)))
        if peak == 0.0:
            return flags
        threshold = 0.5 * peak
    on = np.abs(v) > threshold
    flags[:-1] = (~on[:-1]) & on[1:]
    return flags
