# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; operation-for-operation mirror of ``_pykernels``.

Keep expression order identical to the Python module: the test-suite checks
that both backends agree bit-for-bit.
"""

from libc.math cimport fabs, sqrt, NAN

cdef extern from *:
    """
    /* Same steps as tuple.__new__ for a tuple subclass, without building an
       argument tuple: allocate the subtype and fill the five items. */
    static PyObject *relest_make_frame(PyObject *tp, double r, double l, double lam,
                                       PyObject *quality, PyObject *t)
    {
        PyTypeObject *type = (PyTypeObject *)tp;
        PyObject *o = type->tp_alloc(type, 5);
        PyObject *f;
        if (o == NULL) return NULL;
        if ((f = PyFloat_FromDouble(r)) == NULL) goto fail;
        PyTuple_SET_ITEM(o, 0, f);
        if ((f = PyFloat_FromDouble(l)) == NULL) goto fail;
        PyTuple_SET_ITEM(o, 1, f);
        if ((f = PyFloat_FromDouble(lam)) == NULL) goto fail;
        PyTuple_SET_ITEM(o, 2, f);
        Py_INCREF(quality);
        PyTuple_SET_ITEM(o, 3, quality);
        Py_INCREF(t);
        PyTuple_SET_ITEM(o, 4, t);
        return o;
    fail:
        Py_DECREF(o);
        return NULL;
    }
    """
    object relest_make_frame(object tp, double r, double l, double lam, object quality, object t)

import numpy as np

from .errors import DegenerateInnovationError, ResetDegenerateError, SaturationError, StepSizeError
from .frames import EstimateFrame, Quality

BACKEND = "cython"

cdef enum:
    _MOTION = 0
    _AT_MIN = 1
    _AT_MAX = 2

MOTION = _MOTION
AT_MIN = _AT_MIN
AT_MAX = _AT_MAX

SATURATION_EPS = 1e-9

_HQ = Quality.HQ
_LQ = Quality.LQ


cdef class SemeraKernel:
    cdef public double x0, x1, x2
    cdef public double p00, p01, p02, p11, p12, p22
    cdef double _prev
    cdef public double prev_r_hat
    cdef public bint registered
    cdef public long step_index
    cdef public double l0_mean, var_v, q_r, q_l, threshold, delta, t0
    cdef public object config

    backend = BACKEND

    def __init__(self, double r0_mean, double r0_std, double l0_mean, double l0_std,
                 double rdot_std, double lddot_std, double v_noise_std, double i_noise_std,
                 double delta, double n_sigma, double t0=0.0, config=None):
        cdef double var_l0 = l0_std * l0_std
        cdef double g_r, g_l
        self.x0 = r0_mean
        self.x1 = l0_mean
        self.x2 = l0_mean
        self.p00 = r0_std * r0_std
        self.p01 = 0.0
        self.p02 = 0.0
        self.p11 = var_l0
        self.p12 = var_l0
        self.p22 = var_l0
        self._prev = 0.0
        self.prev_r_hat = r0_mean
        self.registered = False
        self.step_index = -1
        self.l0_mean = l0_mean
        self.delta = delta
        self.var_v = v_noise_std * v_noise_std
        g_r = delta * rdot_std
        g_l = delta * delta * lddot_std
        self.q_r = g_r * g_r
        self.q_l = g_l * g_l
        self.threshold = n_sigma * i_noise_std
        self.t0 = t0
        self.config = config

    @property
    def prev_iota(self):
        return self._prev if self.registered else None

    @property
    def x_hat(self):
        return np.array([self.x0, self.x1, self.x2])

    @property
    def sigma(self):
        return np.array([[self.p00, self.p01, self.p02],
                         [self.p01, self.p11, self.p12],
                         [self.p02, self.p12, self.p22]])

    cdef int _step(self, double u, double iota, double *out) except -1:
        # out = [r_hat, l_hat, lambda_hat, hq]; returns 0 on registration, 1 otherwise
        cdef double delta, prev, h0, h1, h2
        cdef double p00, p01, p02, p11, p12, p22
        cdef double ph0, ph1, ph2, s, k0, k1, k2
        cdef double x0, x1, x2, innov, thr, r_hat, l_hat
        cdef bint hq
        if not self.registered:
            self._prev = iota
            self.registered = True
            self.step_index = 0
            return 0

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

        p00 = p00 - k0 * ph0
        p01 = p01 - 0.5 * (k0 * ph1 + k1 * ph0)
        p02 = p02 - 0.5 * (k0 * ph2 + k2 * ph0)
        p11 = p11 - k1 * ph1
        p12 = p12 - 0.5 * (k1 * ph2 + k2 * ph1)
        p22 = p22 - k2 * ph2

        thr = self.threshold
        if fabs(iota) > thr and fabs(prev) > thr:
            r_hat = x0
            l_hat = x1
            hq = True
        else:
            r_hat = self.prev_r_hat
            l_hat = self.l0_mean
            hq = False
        out[0] = r_hat
        out[1] = l_hat
        out[2] = l_hat * iota
        out[3] = 1.0 if hq else 0.0

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
        return 1

    cdef object _frame(self, double u, double iota, object t):
        cdef double out[4]
        if self._step(u, iota, out) == 0:
            return None
        if t is None:
            t = self.t0 + self.step_index * self.delta
        else:
            t = float(t)
        return relest_make_frame(EstimateFrame, out[0], out[1], out[2], _HQ if out[3] != 0.0 else _LQ, t)

    def step(self, double u, double iota, t=None):
        """Consume ``(u_k, iota_k)``; returns an EstimateFrame, or None on the first sample."""
        return self._frame(u, iota, t)

    def run(self, double[::1] u, double[::1] iota, double[::1] r_out, double[::1] l_out,
            double[::1] lam_out, signed char[::1] hq_out):
        cdef Py_ssize_t k, n = u.shape[0]
        cdef double out[4]
        for k in range(n):
            if self._step(u[k], iota[k], out) == 0:
                r_out[k] = NAN
                l_out[k] = NAN
                lam_out[k] = NAN
                hq_out[k] = -1
            else:
                r_out[k] = out[0]
                l_out[k] = out[1]
                lam_out[k] = out[2]
                hq_out[k] = 1 if out[3] != 0.0 else 0


cdef class IntegralKernel:
    cdef public double r_bar, s_u, s_iota
    cdef public long m
    cdef public double lambda0, l0_mean, delta, threshold, guard, t0, i_noise_std, n_sigma
    cdef double _prev
    cdef public bint registered
    cdef public long step_index

    backend = BACKEND

    def __init__(self, double r0_mean, double l0_mean, double lambda0, double i_noise_std,
                 double delta, double n_sigma, double t0=0.0):
        self.r_bar = r0_mean
        self.s_u = 0.0
        self.s_iota = 0.0
        self.m = 0
        self.lambda0 = lambda0
        self.l0_mean = l0_mean
        self.delta = delta
        self.threshold = n_sigma * i_noise_std
        self.guard = 10.0 * self.threshold
        self._prev = 0.0
        self.registered = False
        self.step_index = -1
        self.t0 = t0
        self.i_noise_std = i_noise_std
        self.n_sigma = n_sigma

    @property
    def prev_iota(self):
        return self._prev if self.registered else None

    cdef int _reset(self) except -1:
        cdef double s_iota
        if self.m == 0:
            return 0
        s_iota = self.s_iota
        if s_iota == 0.0 or fabs(s_iota) < self.guard * sqrt(<double>self.m):
            raise ResetDegenerateError(
                f"current sum {s_iota!r} over {self.m} steps is too small to "
                f"define a resistance (step {self.step_index})")
        self.r_bar = self.s_u / s_iota
        self.s_u = 0.0
        self.s_iota = 0.0
        self.m = 0
        return 0

    cdef int _step(self, double u, double iota, bint reset, double *out) except -1:
        cdef double lam_hat, l_hat, thr
        cdef bint hq
        if not self.registered:
            self._prev = iota
            self.registered = True
            self.step_index = 0
            if reset:
                self._reset()
            return 0

        self.s_u += u
        self.s_iota += iota
        self.m += 1
        lam_hat = self.lambda0 + self.delta * (self.s_u - self.r_bar * self.s_iota)
        thr = self.threshold
        if fabs(iota) > thr and fabs(self._prev) > thr:
            l_hat = lam_hat / iota
            hq = True
        else:
            l_hat = self.l0_mean
            hq = False
        self.step_index += 1
        if reset:
            self._reset()
        self._prev = iota
        out[0] = self.r_bar
        out[1] = l_hat
        out[2] = lam_hat
        out[3] = 1.0 if hq else 0.0
        return 1

    cdef object _frame(self, double u, double iota, bint reset, object t):
        cdef double out[4]
        if self._step(u, iota, reset, out) == 0:
            return None
        if t is None:
            t = self.t0 + self.step_index * self.delta
        else:
            t = float(t)
        return relest_make_frame(EstimateFrame, out[0], out[1], out[2], _HQ if out[3] != 0.0 else _LQ, t)

    def step(self, double u, double iota, bint reset=False, t=None):
        """Consume one sample; the reset is applied after this step's flux and inductance."""
        return self._frame(u, iota, reset, t)

    def run(self, double[::1] u, double[::1] iota, signed char[::1] reset, double[::1] r_out,
            double[::1] l_out, double[::1] lam_out, signed char[::1] hq_out):
        cdef Py_ssize_t k, n = u.shape[0]
        cdef double out[4]
        for k in range(n):
            if self._step(u[k], iota[k], reset[k] != 0, out) == 0:
                r_out[k] = NAN
                l_out[k] = NAN
                lam_out[k] = NAN
                hq_out[k] = -1
            else:
                r_out[k] = out[0]
                l_out[k] = out[1]
                lam_out[k] = out[2]
                hq_out[k] = 1 if out[3] != 0.0 else 0


def filter_step(state, double u_k, double iota_k, t=None):
    """One filter iteration; returns ``(state, frame)``, ``frame`` is None on registration."""
    if type(state) is SemeraKernel:
        return (state, (<SemeraKernel>state)._frame(u_k, iota_k, t))
    # state from the other backend
    return (state, state.step(u_k, iota_k, t))


def integral_step(state, double u_k, double iota_k, bint reset=False, t=None):
    """One integral-estimator iteration; returns ``(state, frame)``."""
    if type(state) is IntegralKernel:
        return (state, (<IntegralKernel>state)._frame(u_k, iota_k, reset, t))
    return (state, state.step(u_k, iota_k, reset, t))


cdef inline double _clamp(double h, double lo, double hi) noexcept:
    # same semantics as min(max(h, lo), hi)
    if h < lo:
        h = lo
    if h > hi:
        return hi
    return h


cdef class ActuatorKernel:
    cdef public double n2, k_air, r_iron0, lambda_sat, lam_limit, mass
    cdef public double k_spring, h_spring, damping, h_min, h_max

    def __init__(self, double turns, double k_air, double r_iron0, double lambda_sat,
                 double mass, double k_spring, double h_spring, double damping,
                 double h_min, double h_max):
        self.n2 = turns * turns
        self.k_air = k_air
        self.r_iron0 = r_iron0
        self.lambda_sat = lambda_sat
        self.lam_limit = lambda_sat * (1.0 - SATURATION_EPS)
        self.mass = mass
        self.k_spring = k_spring
        self.h_spring = h_spring
        self.damping = damping
        self.h_min = h_min
        self.h_max = h_max

    def reluctance(self, double lam, double h):
        if fabs(lam) >= self.lam_limit:
            raise SaturationError(f"|lambda| = {fabs(lam)!r} reached saturation {self.lambda_sat!r}")
        return self.k_air * h + self.r_iron0 / (1.0 - fabs(lam) / self.lambda_sat)

    def current(self, double lam, double h):
        return lam * self.reluctance(lam, h) / self.n2

    cdef inline double _force(self, double lam, double h, double vh) noexcept:
        return (-(lam * lam) * self.k_air / (2.0 * self.n2)
                - self.k_spring * (h - self.h_spring) - self.damping * vh)

    def total_force(self, double lam, double h, double vh):
        return self._force(lam, h, vh)

    cdef inline double _dlam(self, double lam, double h, double v, double r) except? -1.0:
        cdef double rel
        if fabs(lam) >= self.lam_limit:
            raise StepSizeError(
                f"integration stage reached |lambda| = {fabs(lam)!r}; reduce the step size")
        rel = self.k_air * h + self.r_iron0 / (1.0 - fabs(lam) / self.lambda_sat)
        return v - r * (lam * rel / self.n2)

    cdef int _step(self, double *st, double v, double r, double dt) except -1:
        # st = [lam, h, vh, mode]
        cdef double lam = st[0], h = st[1], vh = st[2]
        cdef int mode = <int>st[3]
        cdef double h_min = self.h_min, h_max = self.h_max
        cdef double half = 0.5 * dt
        cdef double inv_m, hc, sixth, f
        cdef double a1, a2, a3, a4, b1, b2, b3, b4, c1, c2, c3, c4
        cdef double l2, l3, l4, h2, h3, h4, v2, v3, v4
        if mode == _MOTION:
            inv_m = 1.0 / self.mass
            hc = _clamp(h, h_min, h_max)
            a1 = self._dlam(lam, hc, v, r)
            b1 = vh
            c1 = self._force(lam, h, vh) * inv_m

            l2 = lam + half * a1
            h2 = h + half * b1
            v2 = vh + half * c1
            hc = _clamp(h2, h_min, h_max)
            a2 = self._dlam(l2, hc, v, r)
            b2 = v2
            c2 = self._force(l2, h2, v2) * inv_m

            l3 = lam + half * a2
            h3 = h + half * b2
            v3 = vh + half * c2
            hc = _clamp(h3, h_min, h_max)
            a3 = self._dlam(l3, hc, v, r)
            b3 = v3
            c3 = self._force(l3, h3, v3) * inv_m

            l4 = lam + dt * a3
            h4 = h + dt * b3
            v4 = vh + dt * c3
            hc = _clamp(h4, h_min, h_max)
            a4 = self._dlam(l4, hc, v, r)
            b4 = v4
            c4 = self._force(l4, h4, v4) * inv_m

            sixth = dt / 6.0
            lam = lam + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            h = h + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            vh = vh + sixth * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            if h <= h_min:
                h = h_min
                vh = 0.0
                mode = _AT_MIN
            elif h >= h_max:
                h = h_max
                vh = 0.0
                mode = _AT_MAX
        else:
            a1 = self._dlam(lam, h, v, r)
            a2 = self._dlam(lam + half * a1, h, v, r)
            a3 = self._dlam(lam + half * a2, h, v, r)
            a4 = self._dlam(lam + dt * a3, h, v, r)
            lam = lam + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            f = self._force(lam, h, 0.0)
            if mode == _AT_MIN and f > 0.0:
                mode = _MOTION
            elif mode == _AT_MAX and f < 0.0:
                mode = _MOTION
        if fabs(lam) >= self.lam_limit:
            raise StepSizeError(f"|lambda| = {fabs(lam)!r} crossed saturation; reduce the step size")
        st[0] = lam
        st[1] = h
        st[2] = vh
        st[3] = mode
        return 0

    def step(self, double lam, double h, double vh, int mode, double v, double r, double dt):
        cdef double st[4]
        st[0] = lam
        st[1] = h
        st[2] = vh
        st[3] = mode
        self._step(st, v, r, dt)
        return (st[0], st[1], st[2], <int>st[3])

    def run(self, double lam, double h, double vh, int mode, double[::1] volts,
            double[::1] resist, long substeps, double dt, double[::1] out_lam,
            double[::1] out_h, double[::1] out_vh, signed char[::1] out_mode):
        cdef Py_ssize_t k, j, n = volts.shape[0]
        cdef double st[4]
        cdef double v, r
        st[0] = lam
        st[1] = h
        st[2] = vh
        st[3] = mode
        out_lam[0] = lam
        out_h[0] = h
        out_vh[0] = vh
        out_mode[0] = mode
        for k in range(1, n):
            v = volts[k]
            r = resist[k]
            for j in range(substeps):
                self._step(st, v, r, dt)
            out_lam[k] = st[0]
            out_h[k] = st[1]
            out_vh[k] = st[2]
            out_mode[k] = <signed char>st[3]
        return (st[0], st[1], st[2], <int>st[3])
