"""Pure-Python kernels: the reference implementation and the import-time fallback.

``_ckernels.pyx`` mirrors this module operation for operation (same expression
order) so both backends produce identical floating-point results.  Any change
here must be repeated there.
"""

import math

import numpy as np

from .errors import DegenerateInnovationError, ResetDegenerateError, SaturationError, StepSizeError
from .frames import EstimateFrame, Quality

BACKEND = "python"

MOTION = 0
AT_MIN = 1
AT_MAX = 2

# relative margin below lambda_sat where the iron reluctance is still evaluated
SATURATION_EPS = 1e-9

_new_frame = tuple.__new__
_HQ = Quality.HQ
_LQ = Quality.LQ


class SemeraKernel:
    """Scalar-unrolled recursive filter over the state [r, l_k, l_{k-1}].

    The covariance is stored as its six unique entries; the update and the
    prediction are written so that the stored matrix is symmetric by
    construction, which is equivalent to symmetrizing the full product.
    """

    __slots__ = (
        "x0", "x1", "x2",
        "p00", "p01", "p02", "p11", "p12", "p22",
        "_prev", "prev_r_hat", "registered", "step_index",
        "l0_mean", "var_v", "q_r", "q_l", "threshold", "delta", "t0", "config",
    )

    def __init__(self, r0_mean, r0_std, l0_mean, l0_std, rdot_std, lddot_std,
                 v_noise_std, i_noise_std, delta, n_sigma, t0=0.0, config=None):
        self.x0 = float(r0_mean)
        self.x1 = float(l0_mean)
        self.x2 = float(l0_mean)
        var_l0 = float(l0_std) * float(l0_std)
        self.p00 = float(r0_std) * float(r0_std)
        self.p01 = 0.0
        self.p02 = 0.0
        self.p11 = var_l0
        self.p12 = var_l0
        self.p22 = var_l0
        self._prev = 0.0
        self.prev_r_hat = float(r0_mean)
        self.registered = False
        self.step_index = -1
        self.l0_mean = float(l0_mean)
        self.delta = float(delta)
        self.var_v = float(v_noise_std) * float(v_noise_std)
        # diagonal of G Q G^T
        g_r = self.delta * float(rdot_std)
        g_l = self.delta * self.delta * float(lddot_std)
        self.q_r = g_r * g_r
        self.q_l = g_l * g_l
        self.threshold = float(n_sigma) * float(i_noise_std)
        self.t0 = float(t0)
        self.config = config

    backend = BACKEND

    @property
    def prev_iota(self):
        """Last registered current sample, or None before the first sample."""
        return self._prev if self.registered else None

    @property
    def x_hat(self):
        """A priori estimate for the next sample, ``[r, l_k, l_{k-1}]``."""
        return np.array([self.x0, self.x1, self.x2])

    @property
    def sigma(self):
        """A priori covariance for the next sample."""
        return np.array([[self.p00, self.p01, self.p02],
                         [self.p01, self.p11, self.p12],
                         [self.p02, self.p12, self.p22]])

    def _advance(self, u, iota):
        # returns None on registration, else (r_hat, l_hat, lambda_hat, hq)
        u = float(u)
        iota = float(iota)
        if not self.registered:
            self._prev = iota
            self.registered = True
            self.step_index = 0
            return None

        delta = self.delta
        prev = self._prev
        h0 = iota
        h1 = iota / delta
        h2 = -prev / delta

        p00 = self.p00
        p01 = self.p01
        p02 = self.p02
        p11 = self.p11
        p12 = self.p12
        p22 = self.p22

        ph0 = p00 * h0 + p01 * h1 + p02 * h2
        ph1 = p01 * h0 + p11 * h1 + p12 * h2
        ph2 = p02 * h0 + p12 * h1 + p22 * h2
        s = h0 * ph0 + h1 * ph1 + h2 * ph2 + self.var_v
        if s == 0.0:
            raise DegenerateInnovationError(
                f"zero innovation variance at step {self.step_index + 1}")
        k0 = ph0 / s
        k1 = ph1 / s
        k2 = ph2 / s

        x0 = self.x0
        x1 = self.x1
        x2 = self.x2
        innov = u - (h0 * x0 + h1 * x1 + h2 * x2)
        x0 = x0 + k0 * innov
        x1 = x1 + k1 * innov
        x2 = x2 + k2 * innov

        # (I - K H) Sigma, symmetrized
        p00 = p00 - k0 * ph0
        p01 = p01 - 0.5 * (k0 * ph1 + k1 * ph0)
        p02 = p02 - 0.5 * (k0 * ph2 + k2 * ph0)
        p11 = p11 - k1 * ph1
        p12 = p12 - 0.5 * (k1 * ph2 + k2 * ph1)
        p22 = p22 - k2 * ph2

        thr = self.threshold
        if abs(iota) > thr and abs(prev) > thr:
            r_hat = x0
            l_hat = x1
            hq = True
        else:
            r_hat = self.prev_r_hat
            l_hat = self.l0_mean
            hq = False
        lam_hat = l_hat * iota

        # F Sigma F^T + G Q G^T with F = [[1,0,0],[0,2,-1],[0,1,0]]
        self.x0 = x0
        self.x1 = 2.0 * x1 - x2
        self.x2 = x1
        self.p00 = p00 + self.q_r
        self.p01 = 2.0 * p01 - p02
        self.p02 = p01
        self.p11 = 4.0 * p11 - 4.0 * p12 + p22 + self.q_l
        self.p12 = 2.0 * p11 - p12
        self.p22 = p11

        self._prev = iota
        self.prev_r_hat = r_hat
        self.step_index += 1
        return (r_hat, l_hat, lam_hat, hq)

    def step(self, u, iota, t=None):
        """Consume ``(u_k, iota_k)``; returns an EstimateFrame, or None on the first sample."""
        res = self._advance(u, iota)
        if res is None:
            return None
        if t is None:
            t = self.t0 + self.step_index * self.delta
        return _new_frame(EstimateFrame, (res[0], res[1], res[2], _HQ if res[3] else _LQ, float(t)))

    def run(self, u, iota, r_out, l_out, lam_out, hq_out):
        """Batch form of :meth:`step` over aligned sequences.

        Writes into preallocated outputs; the registration sample (if any)
        gets NaN estimates and ``hq_out = -1``.
        """
        nan = math.nan
        for k in range(len(u)):
            res = self._advance(u[k], iota[k])
            if res is None:
                r_out[k] = nan
                l_out[k] = nan
                lam_out[k] = nan
                hq_out[k] = -1
            else:
                r_out[k] = res[0]
                l_out[k] = res[1]
                lam_out[k] = res[2]
                hq_out[k] = 1 if res[3] else 0


class IntegralKernel:
    """Running-sum flux integrator with a resistance recomputed at each reset."""

    __slots__ = (
        "r_bar", "s_u", "s_iota", "m", "lambda0", "l0_mean", "delta", "threshold",
        "guard", "_prev", "registered", "step_index", "t0", "i_noise_std", "n_sigma",
    )

    def __init__(self, r0_mean, l0_mean, lambda0, i_noise_std, delta, n_sigma, t0=0.0):
        self.r_bar = float(r0_mean)
        self.s_u = 0.0
        self.s_iota = 0.0
        self.m = 0
        self.lambda0 = float(lambda0)
        self.l0_mean = float(l0_mean)
        self.delta = float(delta)
        self.i_noise_std = float(i_noise_std)
        self.n_sigma = float(n_sigma)
        self.threshold = self.n_sigma * self.i_noise_std
        self.guard = 10.0 * self.threshold
        self._prev = 0.0
        self.registered = False
        self.step_index = -1
        self.t0 = float(t0)

    backend = BACKEND

    @property
    def prev_iota(self):
        return self._prev if self.registered else None

    def _reset(self):
        if self.m == 0:
            return
        s_iota = self.s_iota
        if s_iota == 0.0 or abs(s_iota) < self.guard * math.sqrt(self.m):
            raise ResetDegenerateError(
                f"current sum {s_iota!r} over {self.m} steps is too small to "
                f"define a resistance (step {self.step_index})")
        self.r_bar = self.s_u / s_iota
        self.s_u = 0.0
        self.s_iota = 0.0
        self.m = 0

    def _advance(self, u, iota, reset):
        u = float(u)
        iota = float(iota)
        if not self.registered:
            self._prev = iota
            self.registered = True
            self.step_index = 0
            if reset:
                self._reset()
            return None

        self.s_u += u
        self.s_iota += iota
        self.m += 1
        lam_hat = self.lambda0 + self.delta * (self.s_u - self.r_bar * self.s_iota)
        thr = self.threshold
        if abs(iota) > thr and abs(self._prev) > thr:
            l_hat = lam_hat / iota
            hq = True
        else:
            l_hat = self.l0_mean
            hq = False
        self.step_index += 1
        if reset:
            self._reset()
        self._prev = iota
        return (self.r_bar, l_hat, lam_hat, hq)

    def step(self, u, iota, reset=False, t=None):
        """Consume one sample; the reset is applied after this step's flux and inductance."""
        res = self._advance(u, iota, reset)
        if res is None:
            return None
        if t is None:
            t = self.t0 + self.step_index * self.delta
        return _new_frame(EstimateFrame, (res[0], res[1], res[2], _HQ if res[3] else _LQ, float(t)))

    def run(self, u, iota, reset, r_out, l_out, lam_out, hq_out):
        nan = math.nan
        for k in range(len(u)):
            res = self._advance(u[k], iota[k], bool(reset[k]))
            if res is None:
                r_out[k] = nan
                l_out[k] = nan
                lam_out[k] = nan
                hq_out[k] = -1
            else:
                r_out[k] = res[0]
                l_out[k] = res[1]
                lam_out[k] = res[2]
                hq_out[k] = 1 if res[3] else 0


def filter_step(state, u_k, iota_k, t=None):
    """One filter iteration; returns ``(state, frame)``, ``frame`` is None on registration."""
    return (state, state.step(u_k, iota_k, t))


def integral_step(state, u_k, iota_k, reset=False, t=None):
    """One integral-estimator iteration; returns ``(state, frame)``."""
    return (state, state.step(u_k, iota_k, reset, t))


class ActuatorKernel:
    """Fixed-step RK4 integrator for the three-mode plunger automaton."""

    __slots__ = (
        "n2", "k_air", "r_iron0", "lambda_sat", "lam_limit", "mass", "k_spring",
        "h_spring", "damping", "h_min", "h_max",
    )

    def __init__(self, turns, k_air, r_iron0, lambda_sat, mass, k_spring,
                 h_spring, damping, h_min, h_max):
        self.n2 = float(turns) * float(turns)
        self.k_air = float(k_air)
        self.r_iron0 = float(r_iron0)
        self.lambda_sat = float(lambda_sat)
        self.lam_limit = self.lambda_sat * (1.0 - SATURATION_EPS)
        self.mass = float(mass)
        self.k_spring = float(k_spring)
        self.h_spring = float(h_spring)
        self.damping = float(damping)
        self.h_min = float(h_min)
        self.h_max = float(h_max)

    def reluctance(self, lam, h):
        lam = float(lam)
        if abs(lam) >= self.lam_limit:
            raise SaturationError(f"|lambda| = {abs(lam)!r} reached saturation {self.lambda_sat!r}")
        return self.k_air * h + self.r_iron0 / (1.0 - abs(lam) / self.lambda_sat)

    def current(self, lam, h):
        return lam * self.reluctance(lam, h) / self.n2

    def total_force(self, lam, h, vh):
        return (-(lam * lam) * self.k_air / (2.0 * self.n2)
                - self.k_spring * (h - self.h_spring) - self.damping * vh)

    def _dlam(self, lam, h, v, r):
        if abs(lam) >= self.lam_limit:
            raise StepSizeError(
                f"integration stage reached |lambda| = {abs(lam)!r}; reduce the step size")
        rel = self.k_air * h + self.r_iron0 / (1.0 - abs(lam) / self.lambda_sat)
        return v - r * (lam * rel / self.n2)

    def step(self, lam, h, vh, mode, v, r, dt):
        """One RK4 step of the hybrid system; returns ``(lam, h, vh, mode)``."""
        lam = float(lam)
        h = float(h)
        vh = float(vh)
        h_min = self.h_min
        h_max = self.h_max
        half = 0.5 * dt
        if mode == MOTION:
            inv_m = 1.0 / self.mass
            # reluctance is only defined on [h_min, h_max]; stages may overshoot
            hc = min(max(h, h_min), h_max)
            a1 = self._dlam(lam, hc, v, r)
            b1 = vh
            c1 = self.total_force(lam, h, vh) * inv_m

            l2 = lam + half * a1
            h2 = h + half * b1
            v2 = vh + half * c1
            hc = min(max(h2, h_min), h_max)
            a2 = self._dlam(l2, hc, v, r)
            b2 = v2
            c2 = self.total_force(l2, h2, v2) * inv_m

            l3 = lam + half * a2
            h3 = h + half * b2
            v3 = vh + half * c2
            hc = min(max(h3, h_min), h_max)
            a3 = self._dlam(l3, hc, v, r)
            b3 = v3
            c3 = self.total_force(l3, h3, v3) * inv_m

            l4 = lam + dt * a3
            h4 = h + dt * b3
            v4 = vh + dt * c3
            hc = min(max(h4, h_min), h_max)
            a4 = self._dlam(l4, hc, v, r)
            b4 = v4
            c4 = self.total_force(l4, h4, v4) * inv_m

            sixth = dt / 6.0
            lam = lam + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            h = h + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            vh = vh + sixth * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            if h <= h_min:
                h = h_min
                vh = 0.0
                mode = AT_MIN
            elif h >= h_max:
                h = h_max
                vh = 0.0
                mode = AT_MAX
        else:
            a1 = self._dlam(lam, h, v, r)
            a2 = self._dlam(lam + half * a1, h, v, r)
            a3 = self._dlam(lam + half * a2, h, v, r)
            a4 = self._dlam(lam + dt * a3, h, v, r)
            lam = lam + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            f = self.total_force(lam, h, 0.0)
            if mode == AT_MIN and f > 0.0:
                mode = MOTION
            elif mode == AT_MAX and f < 0.0:
                mode = MOTION
        if abs(lam) >= self.lam_limit:
            raise StepSizeError(f"|lambda| = {abs(lam)!r} crossed saturation; reduce the step size")
        return (lam, h, vh, mode)

    def run(self, lam, h, vh, mode, volts, resist, substeps, dt,
            out_lam, out_h, out_vh, out_mode):
        """Integrate sample intervals ``k = 1..n-1`` with ``substeps`` RK4 steps each.

        ``volts[k]`` and ``resist[k]`` hold over the interval ending at sample
        ``k``; sample 0 records the initial state.
        """
        out_lam[0] = lam
        out_h[0] = h
        out_vh[0] = vh
        out_mode[0] = mode
        for k in range(1, len(volts)):
            v = float(volts[k])
            r = float(resist[k])
            for _ in range(substeps):
                lam, h, vh, mode = self.step(lam, h, vh, mode, v, r, dt)
            out_lam[k] = lam
            out_h[k] = h
            out_vh[k] = vh
            out_mode[k] = mode
        return (lam, h, vh, mode)
