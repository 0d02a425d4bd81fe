"""``relest`` command line.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 input parse or
schema error, 5 runtime (estimation or simulation) error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import _backend
from ..actuator_sim import simulate
from ..errors import ConfigurationError, EstimationError, ParseError, SchemaError
from ..observability import observability_report
from . import io
from .bench import MIN_ITERATIONS, bench_step
from .config import PRESETS, load_config, with_seeds
from .experiment import WINDOWS, replay, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_PARSE = 4
EXIT_RUNTIME = 5


def _config(args):
    cfg = load_config(args.config, preset=args.preset)
    if getattr(args, "seed", None) is not None:
        cfg = with_seeds(cfg, [args.seed])
    return cfg


def cmd_simulate(args):
    cfg = _config(args)
    out = Path(args.out_dir)
    for seed in cfg.seeds if args.all_seeds else cfg.seeds[:1]:
        tr = simulate(cfg.actuator, cfg.waveform, dt_sim=cfg.dt_sim, delta_sample=cfg.delta,
                      noise=cfg.noise, seed=seed)
        io.write_trace_csv(out / f"trace_seed{seed}.csv", tr)
        io.write_input_csv(out / f"input_seed{seed}.csv", tr.t, tr.u, tr.iota)
        print(f"seed {seed}: {len(tr)} samples -> {out}")


def cmd_estimate(args):
    cfg = _config(args)
    out = Path(args.out_dir) / (Path(args.input).stem + "_estimates.csv")
    est = replay(args.input, cfg, out_csv=out)
    print(f"{len(est['semera'])} frames per estimator -> {out}")


def _fmt(row):
    return "  ".join(f"{x:12.5g}" for x in row)


def cmd_compare(args):
    cfg = _config(args)
    res = run_experiment(cfg, out_dir=args.out_dir, jobs=args.jobs, write_traces=not args.no_traces)
    print(f"{cfg.name}: {len(res.seeds)} seed(s), split at {cfg.split_time!r} s")
    print(f"{'':24s}{'rmse_r':>12s}  {'rmse_l':>12s}  {'rmse_lambda':>12s}")
    for w in WINDOWS:
        if res.mean[w] is None:
            print(f"{w:8s} insufficient data")
            continue
        for name in ("semera", "integral"):
            print(f"{w:8s}{name:16s}{_fmt(res.mean[w][name])}")
        print(f"{w:8s}{'ratio S/I':16s}{_fmt(res.ratio(w))}")
    if args.out_dir:
        print(f"tables -> {Path(args.out_dir) / 'rmse.csv'}")


def cmd_obs(args):
    cfg = _config(args)
    out = Path(args.out_dir) / "observability.csv"
    if args.input:
        t, _, iota = io.read_input_csv(args.input)
        report = observability_report(iota, cfg.delta, t=t, rel_tol=cfg.obs_rel_tol, cap=cfg.obs_cap,
                                      source="measured")
    else:
        tr = simulate(cfg.actuator, cfg.waveform, dt_sim=cfg.dt_sim, delta_sample=cfg.delta,
                      noise=cfg.noise, seed=cfg.seeds[0])
        report = observability_report(tr.i, cfg.delta, t=tr.t, rel_tol=cfg.obs_rel_tol, cap=cfg.obs_cap,
                                      source="true")
    io.write_obs_csv(out, report)
    print(f"{len(report)} samples -> {out}")


def cmd_bench(args):
    res = bench_step(args.iterations, batch=args.batch, backend=args.backend)
    print(f"backend {res.backend}, {res.filter.iterations} iterations")
    for name, s in (("filter_step", res.filter), ("integral_step", res.integral)):
        print(f"{name:14s} median {s.median_us:.3f} us  p99 {s.p99_us:.3f} us")
    print(f"batch loop per sample: filter {res.filter_batch_ns:.1f} ns, integral {res.integral_batch_ns:.1f} ns")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=PRESETS, default="valve")
    common.add_argument("--config", help="key = value file layered on the preset")
    common.add_argument("--seed", type=int, help="run this single seed instead of the configured list")
    common.add_argument("--out-dir", default="out")

    parser = argparse.ArgumentParser(prog="relest", description="Reluctance actuator estimation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate traces")
    p.add_argument("--all-seeds", action="store_true", help="one trace per configured seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="replay a t,u,iota CSV through the estimators")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", parents=[common], help="multi-seed RMSE tables")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-traces", action="store_true", help="only write the tables")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("obs", parents=[common], help="observability report")
    p.add_argument("--input", help="measured t,u,iota CSV instead of simulated true currents")
    p.set_defaults(func=cmd_obs)

    p = sub.add_parser("bench", help="step latency")
    p.add_argument("--iterations", type=int, default=1_000_000)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--backend", choices=_backend.available_backends())
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.iterations < MIN_ITERATIONS:
        parser.error(f"--iterations must be >= {MIN_ITERATIONS}")
    try:
        args.func(args)
    except ConfigurationError as exc:
        print(f"relest: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, SchemaError) as exc:
        print(f"relest: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (EstimationError, ArithmeticError, OSError) as exc:
        print(f"relest: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
