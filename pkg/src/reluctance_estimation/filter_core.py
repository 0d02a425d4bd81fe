"""Stochastic recursive estimator of coil resistance, inductance and flux linkage.

The filter tracks ``x = [r, l_k, l_{k-1}]`` from voltage/current samples using
the backward-difference coil equation as a state-dependent observation row,
a constant-resistance / linearly-evolving-inductance process model, a gain
computed from the measured row, and a confidence-interval gate that falls
back to the resting inductance when the current is indistinguishable from
noise.

Typical use::

    state = filter_init(VALVE_FILTER)
    for u, iota in samples:
        state, frame = filter_step(state, u, iota)
        if frame is not None:
            ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import _backend
from .errors import ConfigurationError, NonPhysicalInductanceError
from .frames import EstimateFrame, EstimateSeries, Quality

__all__ = [
    "FilterConfig",
    "VALVE_FILTER",
    "RELAY_FILTER",
    "Quality",
    "EstimateFrame",
    "EstimateSeries",
    "DerivedEstimates",
    "FilterState",
    "filter_init",
    "filter_step",
    "run_filter",
    "observation_row",
    "observation_noise_variance",
    "derived_estimates",
    "TRANSITION",
]

# state transition of [r, l_k, l_{k-1}]
TRANSITION = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, -1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class FilterConfig:
    """Priors, noise levels and sampling settings of the recursive filter.

    Units are SI: Ω, H, Ω/s, H/s², V, A, s.  ``n_sigma`` is the half-width of
    the current confidence interval in noise standard deviations.
    """

    r0_mean: float
    r0_std: float
    l0_mean: float
    l0_std: float
    rdot_std: float
    lddot_std: float
    v_noise_std: float
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
        if self.n_sigma <= 0:
            raise ConfigurationError(f"n_sigma must be > 0, got {self.n_sigma!r}")
        if self.r0_mean <= 0:
            raise ConfigurationError(f"r0_mean must be > 0, got {self.r0_mean!r}")
        if self.l0_mean <= 0:
            raise ConfigurationError(f"l0_mean must be > 0, got {self.l0_mean!r}")
        for name in ("r0_std", "l0_std", "rdot_std", "lddot_std", "v_noise_std", "i_noise_std"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)!r}")

    @property
    def threshold(self) -> float:
        """Current magnitude that must be exceeded for a high-quality estimate."""
        return self.n_sigma * self.i_noise_std

    def kernel_args(self):
        return (self.r0_mean, self.r0_std, self.l0_mean, self.l0_std, self.rdot_std,
                self.lddot_std, self.v_noise_std, self.i_noise_std, self.delta, self.n_sigma)


VALVE_FILTER = FilterConfig(
    r0_mean=77.5, r0_std=1.0, l0_mean=50e-3, l0_std=5e-3, rdot_std=1.0, lddot_std=1e8,
    v_noise_std=15e-3, i_noise_std=1e-3, delta=50e-6, n_sigma=3.29,
)

RELAY_FILTER = FilterConfig(
    r0_mean=1560.0, r0_std=100.0, l0_mean=1.0, l0_std=250e-3, rdot_std=20.0, lddot_std=5e9,
    v_noise_std=15e-3, i_noise_std=0.05e-3, delta=50e-6, n_sigma=3.29,
)


@dataclass(frozen=True)
class DerivedEstimates:
    phi_hat: float
    reluctance_hat: float
    turns: int


# The state object is the active backend's kernel: one C-level call per sample.
FilterState = _backend.kernels.SemeraKernel


def filter_init(config: FilterConfig, t0: float = 0.0, backend: str | None = None) -> FilterState:
    """Fresh filter at the resting-position prior (nothing registered yet)."""
    if not isinstance(config, FilterConfig):
        raise ConfigurationError(f"expected FilterConfig, got {type(config).__name__}")
    kernels = _backend.get_kernels(backend)
    return kernels.SemeraKernel(*config.kernel_args(), t0=float(t0), config=config)


# Compiled when available.  Mutates ``state`` in place and returns
# ``(state, frame)``; ``frame`` is None for the registration sample.  One
# writer per state, samples in order.
filter_step = _backend.kernels.filter_step


def run_filter(config: FilterConfig, u, iota, t=None, backend: str | None = None) -> EstimateSeries:
    """Filter a whole record in the kernel's batch loop.

    Sample 0 registers the first current; the result has one row per sample
    from index 1 on.  ``t`` defaults to ``k * delta``.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    iota = np.ascontiguousarray(iota, dtype=np.float64)
    if u.shape != iota.shape or u.ndim != 1:
        raise ValueError("u and iota must be 1-D arrays of equal length")
    n = len(u)
    if t is None:
        t = np.arange(n) * config.delta
    t = np.asarray(t, dtype=np.float64)
    kernel = _backend.get_kernels(backend).SemeraKernel(*config.kernel_args())
    r = np.empty(n)
    l = np.empty(n)
    lam = np.empty(n)
    hq = np.empty(n, dtype=np.int8)
    kernel.run(u, iota, r, l, lam, hq)
    return EstimateSeries.from_kernel_output(t, r, l, lam, hq)


def observation_row(iota_k: float, iota_prev: float, delta: float) -> np.ndarray:
    """Measured observation row ``[iota_k, iota_k/delta, -iota_{k-1}/delta]``."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    return np.array([iota_k, iota_k / delta, -iota_prev / delta])


def observation_noise_variance(x, config: FilterConfig) -> float:
    """State-dependent variance of the composite observation noise.

    Diagnostic only; the gain uses the voltage-noise variance alone.
    """
    x1, x2, x3 = (float(v) for v in x)
    d = config.delta
    var_i = config.i_noise_std ** 2
    return config.v_noise_std ** 2 + var_i * (x1 * x1 + 2.0 * x1 * x2 / d + x2 * x2 / (d * d) + x3 * x3 / (d * d))


def derived_estimates(frame: EstimateFrame, turns: int) -> DerivedEstimates:
    """Magnetic flux ``lambda/N`` and reluctance ``N^2/l`` from a frame."""
    if turns < 1:
        raise ValueError(f"turns must be >= 1, got {turns!r}")
    if not frame.l_hat > 0:
        raise NonPhysicalInductanceError(f"inductance estimate {frame.l_hat!r} is not positive")
    return DerivedEstimates(frame.lambda_hat / turns, turns * turns / frame.l_hat, turns)
