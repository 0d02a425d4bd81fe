import numpy as np


def rl_square_trace(r=77.5, l=0.05, v_on=30.0, delta=50e-6, period=20e-3, n_cycles=4):
    """Closed-form RL response to the left-continuous square wave, sampled at t_k.

    Each half period is an exponential approach to v/r from the current at the
    switching instant.
    """
    spp = round(period / delta)
    half = spp // 2
    n = n_cycles * spp + 1
    tau = l / r
    i = np.zeros(n)
    v = np.zeros(n)
    i_start = 0.0
    for k in range(1, n):
        phase = (k - 1) % spp
        on = phase < half
        v[k] = v_on if on else 0.0
        if phase == 0 or phase == half:
            i_start = i[k - 1]
        target = v[k] / r
        m = phase + 1 if on else phase - half + 1
        i[k] = target + (i_start - target) * np.exp(-m * delta / tau)
    t = np.arange(n) * delta
    return t, v, i
