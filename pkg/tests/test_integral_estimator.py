import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reluctance_estimation import _backend
from reluctance_estimation.actuator_sim import NoiseSpec, simulate
from reluctance_estimation.errors import ConfigurationError, ResetDegenerateError
from reluctance_estimation.filter_core import RELAY_FILTER, VALVE_FILTER, run_filter
from reluctance_estimation.frames import Quality
from reluctance_estimation.integral_estimator import (
    IntegralConfig,
    cycle_starts,
    integral_init,
    integral_step,
    offline_estimate,
    reset_flags_from_drive,
    run_integral,
)

VALVE_INT = IntegralConfig.from_filter(VALVE_FILTER)


def test_init_valve_values(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    assert s.r_bar == 77.5
    assert s.s_u == 0.0 and s.s_iota == 0.0 and s.m == 0
    assert s.lambda0 == 0.0
    assert s.prev_iota is None


def test_init_relay_values(backend):
    s = integral_init(1560, 1.0, 0, 5e-5, 5e-5, 3.29, backend=backend)
    assert s.r_bar == 1560.0
    assert s.threshold == pytest.approx(3.29 * 5e-5)
    assert IntegralConfig.from_filter(RELAY_FILTER).r0_mean == 1560.0


def test_flux_starts_at_zero_without_magnets(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.0)
    _, f = integral_step(s, 0.0, 0.0)
    assert f.lambda_hat == 0.0


def test_init_rejects_bad_delta():
    with pytest.raises(ConfigurationError):
        integral_init(77.5, 0.05, 0.0, 1e-3, 0.0, 3.29)


def test_dc_reset_recovers_resistance(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 30.0, 0.3797)
    for _ in range(99):
        integral_step(s, 30.0, 0.3797)
    _, f = integral_step(s, 30.0, 0.3797, True)
    assert f.r_hat == pytest.approx(30 / 0.3797, rel=1e-12)
    assert round(f.r_hat, 1) == 79.0
    assert s.s_u == 0.0 and s.s_iota == 0.0


def test_reset_applies_after_publishing(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.3)
    _, f = integral_step(s, 30.0, 0.3, True)
    # flux uses the old r_bar, resistance field reports the new one
    assert f.lambda_hat == pytest.approx(5e-5 * (30.0 - 77.5 * 0.3), rel=1e-14)
    assert f.r_hat == pytest.approx(100.0, rel=1e-14)


def test_reset_on_registration_is_noop(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.0, True)
    assert s.r_bar == 77.5


def test_degenerate_reset_raises(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.0)
    integral_step(s, 1.0, 0.0)
    with pytest.raises(ResetDegenerateError):
        integral_step(s, 1.0, 0.0, True)


def test_ill_conditioned_reset_raises(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.0)
    for _ in range(3):
        integral_step(s, 1.0, 0.01)
    # |s_iota| = 0.04 < 10 * 3.29e-3 * sqrt(4)
    with pytest.raises(ResetDegenerateError):
        integral_step(s, 1.0, 0.01, True)


def test_low_current_publishes_prior_inductance(backend):
    s = integral_init(77.5, 0.05, 0.0, 1e-3, 5e-5, 3.29, backend=backend)
    integral_step(s, 0.0, 0.5)
    _, f = integral_step(s, 30.0, 0.003)
    assert f.quality is Quality.LQ and f.l_hat == 0.05
    _, f = integral_step(s, 30.0, 0.5)
    assert f.quality is Quality.LQ
    _, f = integral_step(s, 30.0, 0.5)
    assert f.quality is Quality.HQ
    assert f.l_hat == pytest.approx(f.lambda_hat / 0.5, rel=1e-15)


def test_telescoping_identity(valve_clean, backend):
    tr = valve_clean
    cfg = IntegralConfig(79.0, 0.05, 0.0, 1e-3, 50e-6, 3.29)
    est = run_integral(cfg, tr.u, tr.iota, np.zeros(len(tr.u)), backend=backend)
    want = 50e-6 * np.cumsum(tr.u[1:] - 79.0 * tr.iota[1:])
    np.testing.assert_allclose(est.lambda_hat, want, rtol=1e-12, atol=1e-13)
    assert np.all(est.r_hat == 79.0)


def test_reset_closure_on_noisy_record(valve_noisy, backend):
    tr = valve_noisy
    reset = reset_flags_from_drive(tr.v)
    est = run_integral(VALVE_INT, tr.u, tr.iota, reset, backend=backend)
    ks = np.flatnonzero(reset)
    ks = ks[ks > 0]
    assert list(ks) == [400, 800, 1200]
    start = 1
    for k in ks:
        r_new = est.r_hat[k - 1]
        lam_closed = VALVE_INT.lambda0 + VALVE_INT.delta * (tr.u[start:k + 1].sum() - r_new * tr.iota[start:k + 1].sum())
        assert abs(lam_closed - VALVE_INT.lambda0) < 1e-9
        start = k + 1


def test_resistance_piecewise_constant(valve_noisy, backend):
    tr = valve_noisy
    reset = reset_flags_from_drive(tr.v)
    est = run_integral(VALVE_INT, tr.u, tr.iota, reset, backend=backend)
    changes = np.flatnonzero(np.diff(est.r_hat)) + 1
    # row j holds sample j + 1; r can only change on a reset sample
    assert set(changes + 1) <= set(np.flatnonzero(reset))
    assert len(np.unique(est.r_hat)) == 4


def test_detector_matches_filter(valve_noisy, backend):
    tr = valve_noisy
    s = run_filter(VALVE_FILTER, tr.u, tr.iota, backend=backend)
    i = run_integral(VALVE_INT, tr.u, tr.iota, reset_flags_from_drive(tr.v), backend=backend)
    np.testing.assert_array_equal(s.hq, i.hq)


def test_streaming_equals_batch(valve_noisy, backend):
    tr = valve_noisy
    reset = reset_flags_from_drive(tr.v)
    batch = run_integral(VALVE_INT, tr.u, tr.iota, reset, t=tr.t, backend=backend)
    s = integral_init(*VALVE_INT.kernel_args(), backend=backend)
    frames = [integral_step(s, u, i, bool(r), t)[1] for t, u, i, r in zip(tr.t, tr.u, tr.iota, reset)]
    assert list(batch.frames()) == frames[1:]


@settings(max_examples=80, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(-0.01, 0.01), st.floats(1e-6, 1e-3))
def test_flux_affine_in_resistance(r_bar, lam0, delta):
    rng = np.random.default_rng(7)
    u = rng.normal(10, 3, 50)
    iota = rng.normal(0.2, 0.05, 50)
    lam = []
    for r in (r_bar, r_bar + 1.0):
        cfg = IntegralConfig(r, 0.05, lam0, 1e-3, delta, 3.29)
        lam.append(run_integral(cfg, u, iota, np.zeros(50)).lambda_hat)
    slope = lam[1] - lam[0]
    np.testing.assert_allclose(slope, -delta * np.cumsum(iota[1:]), rtol=1e-6, atol=1e-12)


def test_cycle_starts():
    reset = np.zeros(1601, dtype=np.int8)
    reset[[0, 400, 800, 1200]] = 1
    np.testing.assert_array_equal(cycle_starts(reset), [1, 401, 801, 1201])
    reset[-1] = 1
    np.testing.assert_array_equal(cycle_starts(reset), [1, 401, 801, 1201])


def test_reset_flags_from_drive():
    v = np.array([0, 30, 30, 0, 0, 30, 0], dtype=float)
    np.testing.assert_array_equal(reset_flags_from_drive(v), [1, 0, 0, 0, 1, 0, 0])
    assert not reset_flags_from_drive(np.zeros(5)).any()


def test_offline_closure_on_clean_record(valve_clean):
    tr = valve_clean
    starts = cycle_starts(reset_flags_from_drive(tr.v))
    est = offline_estimate(VALVE_INT, tr.u, tr.iota, starts)
    ends = np.r_[starts[1:], len(tr.u)] - 1
    for e in ends:
        assert abs(est.lambda_hat[e - 1] - VALVE_INT.lambda0) < 1e-9


def test_offline_matches_online_after_dc_cycle():
    n = 301
    u = np.full(n, 30.0)
    iota = np.full(n, 0.3797)
    reset = np.zeros(n, dtype=np.int8)
    reset[[0, 100, 200]] = 1
    on = run_integral(VALVE_INT, u, iota, reset)
    off = offline_estimate(VALVE_INT, u, iota, cycle_starts(reset))
    sel = slice(100, None)
    np.testing.assert_allclose(on.r_hat[sel], off.r_hat[sel], rtol=1e-12)
    np.testing.assert_allclose(on.lambda_hat[sel], off.lambda_hat[sel], atol=1e-12)


def test_offline_degenerate_cycle():
    u = np.ones(10)
    iota = np.zeros(10)
    with pytest.raises(ResetDegenerateError):
        offline_estimate(VALVE_INT, u, iota, [5])


def test_resistance_step_offline_tracks_online_lags():
    r = np.full(1601, 79.0)
    r[801:] = 85.0
    tr = simulate(noise=NoiseSpec(), r_profile=r)
    reset = reset_flags_from_drive(tr.v)
    on = run_integral(VALVE_INT, tr.u, tr.iota, reset)
    off = offline_estimate(VALVE_INT, tr.u, tr.iota, cycle_starts(reset))
    third = slice(800, 1199)    # rows for samples 801..1199
    fourth = slice(1200, 1600)  # rows for samples 1201..1600
    assert np.all(np.abs(off.r_hat[third] / 85.0 - 1) < 5e-3)
    assert np.all(np.abs(on.r_hat[third] / 79.0 - 1) < 5e-3)
    assert np.all(np.abs(on.r_hat[fourth] / 85.0 - 1) < 5e-3)
    assert np.all(np.abs(off.r_hat[fourth] / 85.0 - 1) < 5e-3)


def test_backends_available():
    assert "python" in _backend.available_backends()
