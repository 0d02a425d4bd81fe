"""Simulation and estimation pipelines, RMSE tables and CSV replay."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..actuator_sim import simulate, snr
from ..errors import SchemaError
from ..filter_core import run_filter
from ..integral_estimator import cycle_starts, offline_estimate, reset_flags_from_drive, run_integral
from ..observability import observability_report
from . import io
from .config import ExperimentConfig, load_preset, to_text

ESTIMATORS = ("semera", "integral", "integral_offline")
WINDOWS = ("first", "after")


def rmse(estimates, truth) -> float:
    e = np.asarray(estimates, dtype=np.float64)
    g = np.asarray(truth, dtype=np.float64)
    if e.shape != g.shape:
        raise ValueError(f"length mismatch: {e.shape} vs {g.shape}")
    if e.size == 0:
        raise ValueError("rmse of an empty sequence")
    return math.sqrt(float(np.mean((e - g) ** 2)))


@dataclass(frozen=True)
class RmseRow:
    r: float
    l: float
    lam: float

    def as_tuple(self):
        return (self.r, self.l, self.lam)


@dataclass(frozen=True)
class RmseTable:
    """SEMERA and integral RMSE for one time window, plus their ratio.

    ``rows`` is empty when the window holds no samples (``insufficient``).
    """

    window: str
    rows: dict = field(default_factory=dict)

    @property
    def insufficient(self) -> bool:
        return not self.rows

    @property
    def ratio(self) -> RmseRow | None:
        if self.insufficient:
            return None
        s = self.rows["semera"]
        i = self.rows["integral"]
        return RmseRow(*(_div(a, b) for a, b in zip(s.as_tuple(), i.as_tuple())))


def _div(a, b):
    if b == 0.0:
        return math.inf if a > 0 else math.nan
    return a / b


def window_masks(t, split_time):
    t = np.asarray(t)
    return {"first": t < split_time, "after": t > split_time}


def rmse_table(window, estimates, t, truth_r, truth_l, truth_lam, mask) -> RmseTable:
    if not np.any(mask):
        return RmseTable(window)
    rows = {}
    for name in ("semera", "integral"):
        s = estimates[name]
        rows[name] = RmseRow(rmse(s.r_hat[mask], truth_r[mask]), rmse(s.l_hat[mask], truth_l[mask]),
                             rmse(s.lambda_hat[mask], truth_lam[mask]))
    return RmseTable(window, rows)


def estimate_record(cfg: ExperimentConfig, t, u, iota, reset=None, backend=None):
    """Run all three estimators over one record (the shared simulate/replay path).

    Reset flags default to rising edges of the measured voltage.
    """
    t = np.asarray(t, dtype=np.float64)
    if reset is None:
        reset = reset_flags_from_drive(u)
    out = {
        "semera": run_filter(cfg.filter, u, iota, t=t, backend=backend),
        "integral": run_integral(cfg.integral, u, iota, reset, t=t, backend=backend),
    }
    starts = cycle_starts(reset)
    out["integral_offline"] = offline_estimate(cfg.integral, u, iota, starts, t=t)
    return out


@dataclass
class SeedResult:
    seed: int
    tables: dict
    trace: object = None
    estimates: dict = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seeds: list
    mean: dict
    std: dict
    files: list = field(default_factory=list)

    def ratio(self, window):
        m = self.mean[window]
        if m is None:
            return None
        s, i = m["semera"], m["integral"]
        return tuple(_div(a, b) for a, b in zip(s, i))


def run_seed(cfg: ExperimentConfig, seed: int, backend=None, keep=False) -> SeedResult:
    trace = simulate(cfg.actuator, cfg.waveform, dt_sim=cfg.dt_sim, delta_sample=cfg.delta,
                     noise=cfg.noise, seed=seed, backend=backend)
    reset = reset_flags_from_drive(trace.v)
    est = estimate_record(cfg, trace.t, trace.u, trace.iota, reset=reset, backend=backend)
    masks = window_masks(trace.t[1:], cfg.split_time)
    truth = (trace.r[1:], trace.l[1:], trace.lam[1:])
    tables = {w: rmse_table(w, est, trace.t[1:], *truth, masks[w]) for w in WINDOWS}
    return SeedResult(seed, tables, trace if keep else None, est if keep else None)


def _aggregate(results, window):
    tabs = [r.tables[window] for r in results]
    if any(t.insufficient for t in tabs):
        return None, None
    mean, std = {}, {}
    for name in ("semera", "integral"):
        a = np.array([t.rows[name].as_tuple() for t in tabs])
        mean[name] = tuple(float(x) for x in a.mean(axis=0))
        std[name] = tuple(float(x) for x in (a.std(axis=0, ddof=1) if len(a) > 1 else np.zeros(3)))
    return mean, std


def _run_seed_worker(args):
    cfg, seed, backend = args
    return run_seed(cfg, seed, backend)


def run_experiment(cfg: ExperimentConfig, out_dir=None, backend=None, jobs=1,
                   write_traces=True) -> ExperimentResult:
    """Simulate every seed, estimate, and aggregate RMSE tables (mean and std over seeds).

    With ``out_dir`` the per-seed traces and estimates, the observability
    report (true currents), SNR series, the RMSE tables and the resolved
    config are written there.  ``jobs > 1`` runs seeds in worker processes.
    """
    seeds = list(cfg.seeds)
    keep = out_dir is not None and write_traces
    if jobs > 1 and not keep:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed_worker, [(cfg, s, backend) for s in seeds]))
    else:
        results = [run_seed(cfg, s, backend, keep=keep) for s in seeds]

    mean, std = {}, {}
    for w in WINDOWS:
        mean[w], std[w] = _aggregate(results, w)
    res = ExperimentResult(cfg, results, mean, std)
    if out_dir is not None:
        res.files = write_experiment(res, Path(out_dir), write_traces)
    return res


def rmse_rows(res: ExperimentResult):
    n = len(res.seeds)
    rows = []
    for w in WINDOWS:
        if res.mean[w] is None:
            rows.append((w, "all", "mean", None, None, None, n))
            continue
        for name in ("semera", "integral"):
            rows.append((w, name, "mean", *res.mean[w][name], n))
            rows.append((w, name, "std", *res.std[w][name], n))
        rows.append((w, "ratio_s_over_i", "mean", *res.ratio(w), n))
    return rows


def write_experiment(res: ExperimentResult, out_dir: Path, write_traces=True):
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = res.config
    files = []
    p = out_dir / "config_resolved.cfg"
    p.write_text(to_text(cfg), encoding="utf-8")
    files.append(p)
    p = out_dir / "rmse.csv"
    io.write_rmse_csv(p, rmse_rows(res))
    files.append(p)
    if not write_traces:
        return files
    for r in res.seeds:
        tr = r.trace
        p = out_dir / f"trace_seed{r.seed}.csv"
        io.write_trace_csv(p, tr)
        files.append(p)
        p = out_dir / f"estimates_seed{r.seed}.csv"
        io.write_estimates_csv(p, r.estimates)
        files.append(p)
        p = out_dir / f"snr_seed{r.seed}.csv"
        io.write_snr_csv(p, tr.t, snr(tr.u, tr.u - tr.v), snr(tr.iota, tr.iota - tr.i))
        files.append(p)
    tr = res.seeds[0].trace
    report = observability_report(tr.i, cfg.delta, t=tr.t, rel_tol=cfg.obs_rel_tol, cap=cfg.obs_cap,
                                  source="true")
    p = out_dir / "observability.csv"
    io.write_obs_csv(p, report)
    files.append(p)
    return files


def replay(input_csv, cfg: ExperimentConfig | str = "valve", out_csv=None, backend=None):
    """Estimate from a recorded ``t,u,iota`` file with all three estimators.

    Reset flags come from the rising edges of the measured voltage.
    """
    if isinstance(cfg, str):
        cfg = load_preset(cfg)
    t, u, iota = io.read_input_csv(input_csv)
    step = float(np.median(np.diff(t))) if len(t) > 1 else cfg.delta
    if abs(step - cfg.delta) > 1e-6 * cfg.delta:
        raise SchemaError(f"sample period {step!r} does not match the filter delta {cfg.delta!r}")
    est = estimate_record(cfg, t, u, iota, backend=backend)
    if out_csv is not None:
        io.write_estimates_csv(out_csv, est)
    return est
