import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reluctance_estimation import _backend
from reluctance_estimation.actuator_sim import NoiseSpec, simulate
from reluctance_estimation.filter_core import VALVE_FILTER, run_filter
from reluctance_estimation.integral_estimator import IntegralConfig, reset_flags_from_drive, run_integral

needs_both = pytest.mark.skipif(len(_backend.available_backends()) < 2, reason="compiled core not built")


def test_python_backend_always_available():
    assert "python" in _backend.available_backends()
    assert _backend.get_kernels("python").BACKEND == "python"
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


def test_env_forces_pure_python():
    env = dict(os.environ, RELEST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import reluctance_estimation as r; print(r.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_both
def test_simulator_bit_identical():
    a = simulate(noise=NoiseSpec(15e-3, 1e-3), seed=4, backend="python")
    b = simulate(noise=NoiseSpec(15e-3, 1e-3), seed=4, backend="cython")
    for name in ("i", "lam", "h", "v_h", "mode", "l", "iota"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@needs_both
def test_estimators_bit_identical(valve_noisy):
    tr = valve_noisy
    reset = reset_flags_from_drive(tr.v)
    cfg = IntegralConfig.from_filter(VALVE_FILTER)
    for fn, args in ((run_filter, (VALVE_FILTER, tr.u, tr.iota)), (run_integral, (cfg, tr.u, tr.iota, reset))):
        a = fn(*args, backend="python")
        b = fn(*args, backend="cython")
        for name in ("r_hat", "l_hat", "lambda_hat", "hq"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@needs_both
@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-1, 1), st.booleans()), min_size=2, max_size=80))
def test_random_streams_bit_identical(samples):
    u, iota, reset = (np.array(x) for x in zip(*samples))
    reset = reset.astype(np.int8)
    a = run_filter(VALVE_FILTER, u, iota, backend="python")
    b = run_filter(VALVE_FILTER, u, iota, backend="cython")
    np.testing.assert_array_equal(a.r_hat, b.r_hat)
    np.testing.assert_array_equal(a.l_hat, b.l_hat)
    cfg = IntegralConfig.from_filter(VALVE_FILTER)
    try:
        a = run_integral(cfg, u, iota, reset, backend="python")
    except ArithmeticError as exc:
        with pytest.raises(type(exc)):
            run_integral(cfg, u, iota, reset, backend="cython")
        return
    b = run_integral(cfg, u, iota, reset, backend="cython")
    np.testing.assert_array_equal(a.lambda_hat, b.lambda_hat)
    np.testing.assert_array_equal(a.r_hat, b.r_hat)
