"""Structural observability of the [r, l_k, l_{k-1}] model under a current excitation.

All functions take noiseless (or measured) current sequences.  A window
``[k, k+n]`` needs the currents ``i_{k-1} .. i_{k+n}``: each output row uses
the current at its own sample and the one before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filter_core import TRANSITION

__all__ = [
    "output_row",
    "transition_power",
    "obs_matrix",
    "det_window",
    "numeric_rank",
    "gramian",
    "gramian_bounds",
    "lambda_state_rows",
    "controllability_matrix",
    "steps_since_observable",
    "ObservabilityReport",
    "observability_report",
    "DEFAULT_REL_TOL",
    "DEFAULT_CAP",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_CAP = 500


def output_row(i_k, i_prev, delta):
    """``C_k = [i_k, i_k/delta, -i_{k-1}/delta]``."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    return np.array([i_k, i_k / delta, -i_prev / delta], dtype=np.float64)


def transition_power(j):
    """``F^j`` in closed form (valid for any integer j)."""
    return np.array([[1.0, 0.0, 0.0], [0.0, j + 1.0, -j], [0.0, float(j), 1.0 - j]])


def _currents(currents, min_len):
    c = np.asarray(currents, dtype=np.float64).ravel()
    if len(c) < min_len:
        raise ValueError(f"need at least {min_len} currents, got {len(c)}")
    return c


def obs_matrix(currents, delta):
    """Rows ``C_{k+j} F^j`` for ``j = 0..n`` from currents ``i_{k-1} .. i_{k+n}``."""
    c = _currents(currents, 3)
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    cur = c[1:]
    prev = c[:-1]
    j = np.arange(len(cur), dtype=np.float64)
    # C F^j = [i, (j+1) i/d - j p/d, -j i/d + (j-1) p/d] with p = i_{prev}
    out = np.empty((len(cur), 3))
    out[:, 0] = cur
    out[:, 1] = ((j + 1.0) * cur - j * prev) / delta
    out[:, 2] = (-j * cur + (j - 1.0) * prev) / delta
    return out


def det_window(i_prev, i_k, i_k1, i_k2, delta):
    """Closed-form determinant of the observability matrix over ``[k, k+2]``."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    a, b, c, d = i_prev, i_k, i_k1, i_k2
    num = (2.0 * a * c * c + 2.0 * b * b * d - b * b * c - b * c * c - a * b * d - a * c * d)
    return num / (delta * delta)


def numeric_rank(matrix, rel_tol=DEFAULT_REL_TOL):
    """Singular values above ``rel_tol`` times the largest one."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol!r}")
    m = np.asarray(matrix, dtype=np.float64)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def gramian(currents, delta):
    """Observability Gramian, the sum of ``(C_i F^j)^T (C_i F^j)`` over the window."""
    o = obs_matrix(currents, delta)
    w = np.zeros((3, 3))
    for row in o:
        w += np.outer(row, row)
    return w


def gramian_bounds(w):
    """Smallest and largest eigenvalue of a symmetric Gramian (beta_1, beta_2 candidates)."""
    ev = np.linalg.eigvalsh(np.asarray(w, dtype=np.float64))
    return float(ev[0]), float(ev[-1])


def lambda_state_rows(currents, delta):
    """Observability rows when flux linkage replaces the inductances as state.

    Row j is ``[i_{k+j-1}, 1/delta, -1/delta]``; the last two columns are
    always proportional, so the rank never exceeds two.
    """
    c = _currents(currents, 1)
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    out = np.empty((len(c), 3))
    out[:, 0] = c
    out[:, 1] = 1.0 / delta
    out[:, 2] = -1.0 / delta
    return out


def controllability_matrix(delta):
    """``[G, F G, F^2 G]`` for the process-noise input of the filter model."""
    g = np.array([[delta, 0.0], [0.0, delta * delta], [0.0, 0.0]])
    fg = TRANSITION @ g
    return np.hstack([g, fg, TRANSITION @ fg])


def steps_since_observable(currents, delta, rel_tol=DEFAULT_REL_TOL, cap=DEFAULT_CAP):
    """For each sample k, the shortest full-rank window ``[k-n, k]`` (n >= 2), as n.

    Windows that would need currents before the start of the record, or more
    than ``cap`` steps, report ``cap``.  The scan for sample k starts at
    ``n_{k-1} + 1``, which is always full rank when ``n_{k-1}`` was (adding
    rows cannot lower the rank), and shrinks the window from there.
    """
    c = np.asarray(currents, dtype=np.float64).ravel()
    n_samples = len(c)
    out = np.full(n_samples, cap, dtype=np.int64)
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    if n_samples < 4:
        return out
    # rows of every window are C_{m} F^{m-start}; precompute C once
    rows = np.empty((n_samples, 3))
    rows[0] = np.nan
    rows[1:, 0] = c[1:]
    rows[1:, 1] = c[1:] / delta
    rows[1:, 2] = -c[:-1] / delta

    def full_rank(k, n):
        start = k - n
        j = np.arange(n + 1, dtype=np.float64)
        block = rows[start:k + 1]
        o = np.empty((n + 1, 3))
        o[:, 0] = block[:, 0]
        o[:, 1] = (j + 1.0) * block[:, 1] + j * block[:, 2]
        o[:, 2] = -j * block[:, 1] + (1.0 - j) * block[:, 2]
        return numeric_rank(o, rel_tol) == 3

    last = cap
    for k in range(3, n_samples):
        max_n = min(k - 1, cap - 1)
        if max_n < 2:
            continue
        hi = min(last + 1, max_n) if last < cap else max_n
        if not full_rank(k, hi):
            # a shorter window ending at k is a row subset of a longer one times
            # an invertible power of F, so rank can only grow with the length
            if hi == max_n or not full_rank(k, max_n):
                last = cap
                continue
            hi = max_n
        n = hi
        while n > 2 and full_rank(k, n - 1):
            n -= 1
        out[k] = n
        last = n
    return out


@dataclass
class ObservabilityReport:
    """Per-sample observability diagnostics.

    ``det3`` and the Gramian bounds are for the shortest window ``[k-2, k]``;
    ``rank`` is the rank of that window.
    """

    t: np.ndarray
    k: np.ndarray
    det3: np.ndarray
    rank: np.ndarray
    gramian_min_eig: np.ndarray
    gramian_max_eig: np.ndarray
    steps_since_observable: np.ndarray
    source: str

    def __len__(self):
        return len(self.k)


def observability_report(currents, delta, t=None, rel_tol=DEFAULT_REL_TOL, cap=DEFAULT_CAP,
                         source="true"):
    """Observability diagnostics for every sample of a current record.

    ``source`` records whether the currents are the simulated truth
    (``"true"``) or measurements (``"measured"``).
    """
    if source not in ("true", "measured"):
        raise ValueError(f"source must be 'true' or 'measured', got {source!r}")
    c = np.asarray(currents, dtype=np.float64).ravel()
    n = len(c)
    if t is None:
        t = np.arange(n) * delta
    det3 = np.full(n, np.nan)
    rank = np.zeros(n, dtype=np.int64)
    gmin = np.full(n, np.nan)
    gmax = np.full(n, np.nan)
    for k in range(3, n):
        window = c[k - 3:k + 1]
        det3[k] = det_window(window[0], window[1], window[2], window[3], delta)
        o = obs_matrix(window, delta)
        rank[k] = numeric_rank(o, rel_tol)
        gmin[k], gmax[k] = gramian_bounds(o.T @ o)
    ssn = steps_since_observable(c, delta, rel_tol=rel_tol, cap=cap)
    return ObservabilityReport(np.asarray(t, dtype=np.float64), np.arange(n), det3, rank, gmin, gmax,
                               ssn, source)
