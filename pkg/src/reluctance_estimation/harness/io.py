"""CSV readers and writers.

Floats are written with ``repr`` so files round-trip exactly and identical
runs give byte-identical output.  Files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import EmptyInputError, ParseError, SchemaError

INPUT_HEADER = ("t", "u", "iota")
TRACE_HEADER = ("t", "v", "i", "u", "iota", "r_true", "l_true", "lambda_true", "h", "mode")
ESTIMATE_HEADER = ("t", "estimator", "r_hat", "l_hat", "lambda_hat", "quality")
OBS_HEADER = ("t", "k", "det3", "rank", "gram_min", "gram_max", "steps_since_observable", "source")
SNR_HEADER = ("t", "snr_u", "snr_iota")
RMSE_HEADER = ("window", "estimator", "stat", "rmse_r", "rmse_l", "rmse_lambda", "n_seeds")


def _f(x) -> str:
    return repr(float(x))


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_input_csv(path, t, u, iota):
    fh, w = _writer(path)
    with fh:
        w.writerow(INPUT_HEADER)
        for row in zip(t, u, iota):
            w.writerow([_f(x) for x in row])


def write_trace_csv(path, trace):
    fh, w = _writer(path)
    with fh:
        w.writerow(TRACE_HEADER)
        cols = (trace.t, trace.v, trace.i, trace.u, trace.iota, trace.r, trace.l, trace.lam, trace.h)
        for k, row in enumerate(zip(*cols)):
            w.writerow([_f(x) for x in row] + [str(int(trace.mode[k]))])


def write_estimates_csv(path, estimates):
    """``estimates`` maps estimator name to an EstimateSeries; rows grouped by estimator."""
    fh, w = _writer(path)
    with fh:
        w.writerow(ESTIMATE_HEADER)
        for name, s in estimates.items():
            for t, r, l, lam, hq in zip(s.t, s.r_hat, s.l_hat, s.lambda_hat, s.hq):
                w.writerow([_f(t), name, _f(r), _f(l), _f(lam), "HQ" if hq else "LQ"])


def write_obs_csv(path, report):
    fh, w = _writer(path)
    with fh:
        w.writerow(OBS_HEADER)
        for k in range(len(report)):
            w.writerow([_f(report.t[k]), str(int(report.k[k])), _f(report.det3[k]), str(int(report.rank[k])),
                        _f(report.gramian_min_eig[k]), _f(report.gramian_max_eig[k]),
                        str(int(report.steps_since_observable[k])), report.source])


def write_snr_csv(path, t, snr_u, snr_iota):
    fh, w = _writer(path)
    with fh:
        w.writerow(SNR_HEADER)
        for row in zip(t, snr_u, snr_iota):
            w.writerow([_f(x) for x in row])


def write_rmse_csv(path, rows):
    """``rows``: iterables matching RMSE_HEADER; None values become ``insufficient_data``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(RMSE_HEADER)
        for row in rows:
            w.writerow(["insufficient_data" if x is None else (_f(x) if isinstance(x, float) else str(x))
                        for x in row])


def read_input_csv(path, delta=None, rel_tol=1e-6):
    """Read ``t,u,iota`` columns.

    Raises ParseError (with line number) on malformed rows, EmptyInputError
    on a file without data rows and SchemaError on a wrong header or on
    timestamps that are not uniformly spaced (at ``delta`` if given).
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {str(path)!r}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
        except csv.Error as exc:
            raise ParseError(str(exc), line=1) from None
        if header is None:
            raise EmptyInputError(f"{str(path)!r} is empty")
        if tuple(h.strip() for h in header) != INPUT_HEADER:
            raise SchemaError(f"expected header {','.join(INPUT_HEADER)!r}, got {','.join(header)!r}")
        rows = []
        try:
            for row in reader:
                lineno = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
                try:
                    vals = [float(c) for c in row]
                except ValueError:
                    raise ParseError(f"non-numeric field in {','.join(row)!r}", line=lineno) from None
                if not all(np.isfinite(vals)):
                    raise ParseError("non-finite value", line=lineno)
                rows.append(vals)
        except csv.Error as exc:
            raise ParseError(str(exc), line=reader.line_num) from None
    if not rows:
        raise EmptyInputError(f"{str(path)!r} has a header but no data rows")
    data = np.array(rows, dtype=np.float64)
    t, u, iota = data[:, 0], data[:, 1], data[:, 2]
    check_uniform(t, delta, rel_tol)
    return t, u, iota


def check_uniform(t, delta=None, rel_tol=1e-6):
    if len(t) < 2:
        return
    d = np.diff(t)
    step = float(np.median(d)) if delta is None else float(delta)
    if not step > 0:
        raise SchemaError("timestamps must increase")
    bad = np.flatnonzero(np.abs(d - step) > rel_tol * step)
    if bad.size:
        k = int(bad[0])
        # +2: header line plus 1-based numbering
        raise SchemaError(f"non-uniform timestamp step {d[k]!r} at line {k + 3} (expected {step!r})")


def read_estimates_csv(path):
    """Estimate rows grouped per estimator as column arrays (for tests and tooling)."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ESTIMATE_HEADER:
            raise SchemaError(f"unexpected estimate header {','.join(header)!r}")
        for row in reader:
            cols = out.setdefault(row[1], ([], [], [], [], []))
            cols[0].append(float(row[0]))
            cols[1].append(float(row[2]))
            cols[2].append(float(row[3]))
            cols[3].append(float(row[4]))
            cols[4].append(row[5] == "HQ")
    return {k: tuple(np.array(c) for c in v) for k, v in out.items()}
