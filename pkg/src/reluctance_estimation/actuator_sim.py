"""Ground-truth simulator of a plunger solenoid valve.

Magnetic side: a single-loop equivalent circuit with an air-gap reluctance
proportional to the gap and a saturating iron reluctance.  Mechanical side:
plunger mass, preloaded spring and viscous damping, with hard stops at both
ends of the stroke modelled as a three-mode hybrid automaton.

The gap ``h`` measures the open distance; the magnetic force pulls it toward
``h_min`` and the spring pushes it toward ``h_spring > h_max``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, fields

import numpy as np

from . import _backend
from .errors import ConfigurationError, SaturationError

__all__ = [
    "ActuatorParams",
    "VALVE_ACTUATOR",
    "Mode",
    "SimState",
    "SimTrace",
    "DriveWaveform",
    "NoiseSpec",
    "initial_state",
    "reluctance",
    "current_from_flux",
    "apparent_inductance",
    "flux_rhs",
    "forces",
    "hybrid_step",
    "simulate",
    "snr",
    "SATURATION_EPS",
]

SATURATION_EPS = 1e-9


class Mode(enum.IntEnum):
    MOTION = 0
    AT_MIN = 1
    AT_MAX = 2


@dataclass(frozen=True)
class ActuatorParams:
    """Coil, magnetic-circuit and mechanical constants (SI units).

    ``r_drift`` adds a linear resistance drift in Ω/s on top of ``r_true``.
    """

    turns: int = 1200
    k_air: float = 2.7e10
    r_iron0: float = 3.25e6
    lambda_sat: float = 0.024
    mass: float = 1.6e-3
    k_spring: float = 37.0
    h_spring: float = 22.5e-3
    damping: float = 0.4
    h_min: float = 0.0
    h_max: float = 0.9e-3
    r_true: float = 79.0
    r_drift: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(f"{f.name} must be a finite number, got {value!r}")
        if int(self.turns) != self.turns or self.turns < 1:
            raise ConfigurationError(f"turns must be a positive integer, got {self.turns!r}")
        for name in ("k_air", "r_iron0", "lambda_sat", "mass", "k_spring", "h_spring", "r_true"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.damping < 0:
            raise ConfigurationError(f"damping must be >= 0, got {self.damping!r}")
        if self.h_min < 0 or not self.h_min < self.h_max:
            raise ConfigurationError(f"need 0 <= h_min < h_max, got {self.h_min!r}, {self.h_max!r}")

    def kernel_args(self):
        return (float(self.turns), self.k_air, self.r_iron0, self.lambda_sat, self.mass,
                self.k_spring, self.h_spring, self.damping, self.h_min, self.h_max)

    def kernel(self, backend=None):
        return _backend.get_kernels(backend).ActuatorKernel(*self.kernel_args())


VALVE_ACTUATOR = ActuatorParams()


@dataclass(frozen=True)
class SimState:
    lam: float
    h: float
    v_h: float
    mode: Mode
    t: float = 0.0


def initial_state(p: ActuatorParams) -> SimState:
    """De-energized, spring holding the plunger at the open stop."""
    return SimState(0.0, p.h_max, 0.0, Mode.AT_MAX, 0.0)


@dataclass(frozen=True)
class DriveWaveform:
    """Square-wave supply: ``v_on`` for the first ``duty`` of each period, then 0 V."""

    v_on: float = 30.0
    period: float = 20e-3
    duty: float = 0.5
    n_cycles: int = 4

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ConfigurationError(f"duty must be in (0, 1), got {self.duty!r}")
        if not self.period > 0:
            raise ConfigurationError(f"period must be > 0, got {self.period!r}")
        if int(self.n_cycles) != self.n_cycles or self.n_cycles < 1:
            raise ConfigurationError(f"n_cycles must be a positive integer, got {self.n_cycles!r}")

    @property
    def duration(self) -> float:
        return self.n_cycles * self.period

    def samples_per_period(self, delta: float) -> int:
        spp = round(self.period / delta)
        if spp < 2 or abs(spp * delta - self.period) > 1e-9 * self.period:
            raise ConfigurationError(f"period {self.period!r} is not a multiple of delta {delta!r}")
        return spp

    def sample_voltages(self, delta: float) -> np.ndarray:
        """Voltage over each sample interval ``(t_{k-1}, t_k]``; entry 0 is 0 V.

        ``n_cycles * period / delta + 1`` samples including ``t = 0``.
        """
        spp = self.samples_per_period(delta)
        on = round(self.duty * spp)
        n = self.n_cycles * spp + 1
        k = np.arange(n)
        v = np.where(((k - 1) % spp) < on, float(self.v_on), 0.0)
        v[0] = 0.0
        return v


@dataclass(frozen=True)
class NoiseSpec:
    v_std: float = 0.0
    i_std: float = 0.0

    def __post_init__(self):
        if self.v_std < 0 or self.i_std < 0:
            raise ConfigurationError("noise standard deviations must be >= 0")


@dataclass
class SimTrace:
    """Samples at uniform spacing ``delta``; ``v[k]`` drove the interval ending at ``t[k]``."""

    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    u: np.ndarray
    iota: np.ndarray
    r: np.ndarray
    l: np.ndarray
    lam: np.ndarray
    h: np.ndarray
    v_h: np.ndarray
    mode: np.ndarray
    delta: float
    seed: int | None = None

    def __len__(self):
        return len(self.t)


def _check_gap(h, p):
    if not p.h_min <= h <= p.h_max:
        raise ValueError(f"gap {h!r} outside [{p.h_min!r}, {p.h_max!r}]")


def reluctance(lam, h, p: ActuatorParams = VALVE_ACTUATOR) -> float:
    """Air-gap plus saturating iron reluctance (1/H)."""
    _check_gap(h, p)
    lam = float(lam)
    if abs(lam) >= p.lambda_sat * (1.0 - SATURATION_EPS):
        raise SaturationError(f"|lambda| = {abs(lam)!r} reached saturation {p.lambda_sat!r}")
    return p.k_air * h + p.r_iron0 / (1.0 - abs(lam) / p.lambda_sat)


def current_from_flux(lam, h, p: ActuatorParams = VALVE_ACTUATOR) -> float:
    return lam * reluctance(lam, h, p) / (p.turns * p.turns)


def apparent_inductance(lam, h, p: ActuatorParams = VALVE_ACTUATOR) -> float:
    return (p.turns * p.turns) / reluctance(lam, h, p)


def flux_rhs(lam, h, v, p: ActuatorParams = VALVE_ACTUATOR, r=None) -> float:
    """``d lambda / dt`` for supply voltage ``v``; ``r`` defaults to ``p.r_true``."""
    r = p.r_true if r is None else r
    return v - r * current_from_flux(lam, h, p)


def forces(lam, h, v_h, p: ActuatorParams = VALVE_ACTUATOR):
    """``(f_mag, f_total)`` in N; positive force opens the gap."""
    n2 = float(p.turns) * float(p.turns)
    f_mag = -(lam * lam) * p.k_air / (2.0 * n2)
    f_total = f_mag - p.k_spring * (h - p.h_spring) - p.damping * v_h
    return f_mag, f_total


def hybrid_step(state: SimState, v, dt, p: ActuatorParams = VALVE_ACTUATOR, r=None, backend=None) -> SimState:
    """One RK4 step of the hybrid automaton."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    r = p.r_true if r is None else r
    lam, h, vh, mode = p.kernel(backend).step(state.lam, state.h, state.v_h, int(state.mode), v, r, dt)
    return SimState(lam, h, vh, Mode(mode), state.t + dt)


def _resistance_samples(p, t, r_profile):
    if r_profile is None:
        return p.r_true + p.r_drift * t
    if callable(r_profile):
        r = np.asarray([r_profile(tk) for tk in t], dtype=np.float64)
    else:
        r = np.array(r_profile, dtype=np.float64)
        if r.shape != t.shape:
            raise ValueError(f"r_profile has {r.size} samples, trace has {t.size}")
    if not np.all(r > 0):
        raise ConfigurationError("resistance profile must be positive")
    return r


@functools.lru_cache(maxsize=16)
def _true_trajectory(p, waveform, dt_sim, delta, backend, r_key):
    # seed-independent part of simulate(); cached for multi-seed runs
    r_profile = None if r_key is None else np.frombuffer(r_key, dtype=np.float64)
    substeps = round(delta / dt_sim)
    if substeps < 1 or abs(substeps * dt_sim - delta) > 1e-9 * delta:
        raise ConfigurationError(f"dt_sim {dt_sim!r} does not divide delta {delta!r}")
    v = waveform.sample_voltages(delta)
    n = len(v)
    t = np.arange(n) * delta
    r = np.ascontiguousarray(_resistance_samples(p, t, r_profile))
    lam = np.empty(n)
    h = np.empty(n)
    vh = np.empty(n)
    mode = np.empty(n, dtype=np.int8)
    s0 = initial_state(p)
    p.kernel(backend).run(s0.lam, s0.h, s0.v_h, int(s0.mode), v, r, substeps, dt_sim,
                          lam, h, vh, mode)
    n2 = float(p.turns) * float(p.turns)
    rel = p.k_air * h + p.r_iron0 / (1.0 - np.abs(lam) / p.lambda_sat)
    i = lam * rel / n2
    l = n2 / rel
    out = (t, v, i, r, l, lam, h, vh, mode)
    for a in out:
        a.setflags(write=False)
    return out


def simulate(p: ActuatorParams = VALVE_ACTUATOR, waveform: DriveWaveform = DriveWaveform(),
             dt_sim=1e-6, delta_sample=50e-6, noise: NoiseSpec = NoiseSpec(), seed=0,
             r_profile=None, backend=None) -> SimTrace:
    """Integrate at ``dt_sim``, sample every ``delta_sample`` and add measurement noise.

    ``r_profile`` overrides the resistance per sample interval (array of the
    trace length, or a function of time).  The noise generator is
    ``numpy.random.default_rng(seed)``; voltage noise is drawn before current
    noise.  A zero standard deviation injects nothing, so ``u == v`` exactly.
    """
    if callable(r_profile):
        t = np.arange(len(waveform.sample_voltages(delta_sample))) * delta_sample
        r_profile = _resistance_samples(p, t, r_profile)
    r_key = None if r_profile is None else np.ascontiguousarray(r_profile, dtype=np.float64).tobytes()
    backend = backend or _backend.BACKEND
    t, v, i, r, l, lam, h, vh, mode = _true_trajectory(p, waveform, float(dt_sim), float(delta_sample),
                                                       backend, r_key)
    rng = np.random.default_rng(seed)
    n = len(t)
    u = v + rng.normal(0.0, noise.v_std, n) if noise.v_std > 0 else v.copy()
    iota = i + rng.normal(0.0, noise.i_std, n) if noise.i_std > 0 else i.copy()
    return SimTrace(t.copy(), v.copy(), i.copy(), u, iota, r.copy(), l.copy(), lam.copy(), h.copy(),
                    vh.copy(), mode.copy(), float(delta_sample), seed)


def snr(signal_value, noise_value):
    """``20 log10 |signal / noise|`` in dB; ``+inf`` where the noise sample is zero."""
    s = np.asarray(signal_value, dtype=np.float64)
    n = np.asarray(noise_value, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 20.0 * np.log10(np.abs(s / n))
    out = np.where(n == 0.0, np.inf, out)
    return float(out) if out.ndim == 0 else out
