import csv
from dataclasses import replace

import numpy as np
import pytest

from reluctance_estimation.actuator_sim import DriveWaveform, NoiseSpec, simulate
from reluctance_estimation.errors import ConfigurationError, EmptyInputError, ParseError, SchemaError
from reluctance_estimation.filter_core import RELAY_FILTER, VALVE_FILTER
from reluctance_estimation.harness import cli, io
from reluctance_estimation.harness.bench import MIN_ITERATIONS, bench_step
from reluctance_estimation.harness.config import (
    apply_overrides,
    load_config,
    load_preset,
    parse_config_text,
    parse_seeds,
    to_text,
    with_seeds,
)
from reluctance_estimation.harness.experiment import replay, rmse, run_experiment, run_seed


def test_rmse_basics():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([1.5, 2.5], [1.0, 2.0]) == 0.5
    assert rmse([-2.0, -2.0], [0.0, 0.0]) == 2.0
    with pytest.raises(ValueError):
        rmse([1, 2], [1])
    with pytest.raises(ValueError):
        rmse([], [])


def test_presets_load():
    v = load_preset("valve")
    assert v.filter == VALVE_FILTER
    assert v.seeds == tuple(range(20))
    assert v.split_time == 0.02
    assert (v.noise.v_std, v.noise.i_std) == (15e-3, 1e-3)
    assert v.actuator.r_true == 79.0
    r = load_preset("relay")
    assert r.filter == RELAY_FILTER
    assert r.actuator.r_true == 1590.0
    with pytest.raises(ConfigurationError):
        load_preset("motor")


def test_config_round_trip():
    cfg = with_seeds(load_preset("relay"), [3, 5])
    again = apply_overrides(load_preset("valve"), parse_config_text(to_text(cfg)))
    assert again == cfg


def test_config_file_layering(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nfilter.r0_mean = 80\nexperiment.seeds = 1, 4\nwaveform.n_cycles = 2\n")
    cfg = load_config(p)
    assert cfg.filter.r0_mean == 80.0
    assert cfg.seeds == (1, 4)
    assert cfg.waveform.n_cycles == 2
    assert cfg.actuator == load_preset("valve").actuator


@pytest.mark.parametrize("text", [
    "filter.nope = 1", "bogus = 1", "filter.r0_mean = abc", "filter.delta = -1", "experiment.seeds = 5-2",
    "experiment.split_time = 1.0", "waveform.period = 0.02012", "filter.r0_mean = 1\nfilter.r0_mean = 2",
    "no equals sign", "noise.v_std = -1",
])
def test_config_errors(text):
    with pytest.raises(ConfigurationError):
        apply_overrides(load_preset("valve"), parse_config_text(text))


def test_config_error_line_number():
    with pytest.raises(ConfigurationError, match=":3:"):
        parse_config_text("a.b = 1\n\nbroken\n")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.cfg")


def test_parse_seeds():
    assert parse_seeds("0-3") == (0, 1, 2, 3)
    assert parse_seeds("1, 4,9") == (1, 4, 9)
    with pytest.raises(ConfigurationError):
        parse_seeds("x")


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_input_csv(tmp_path):
    p = write(tmp_path / "in.csv", "t,u,iota\n0,0,0\n5e-05,30,0.01\n0.0001,30,0.02\n")
    t, u, iota = io.read_input_csv(p)
    np.testing.assert_array_equal(u, [0, 30, 30])
    np.testing.assert_array_equal(iota, [0, 0.01, 0.02])


def test_read_input_errors(tmp_path):
    with pytest.raises(EmptyInputError):
        io.read_input_csv(write(tmp_path / "a.csv", ""))
    with pytest.raises(EmptyInputError):
        io.read_input_csv(write(tmp_path / "b.csv", "t,u,iota\n"))
    with pytest.raises(SchemaError):
        io.read_input_csv(write(tmp_path / "c.csv", "time,u,i\n0,0,0\n"))
    with pytest.raises(ParseError) as exc:
        io.read_input_csv(write(tmp_path / "d.csv", "t,u,iota\n0,0,0\n5e-05,x,0\n"))
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        io.read_input_csv(write(tmp_path / "e.csv", "t,u,iota\n0,0\n"))
    with pytest.raises(SchemaError, match="line 4"):
        io.read_input_csv(write(tmp_path / "f.csv", "t,u,iota\n0,0,0\n5e-05,0,0\n0.0002,0,0\n0.00025,0,0\n"))


def test_trace_and_estimate_headers(tmp_path):
    cfg = with_seeds(load_preset("valve"), [0])
    res = run_experiment(cfg, out_dir=tmp_path)
    with open(tmp_path / "trace_seed0.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["t", "v", "i", "u", "iota", "r_true", "l_true", "lambda_true", "h", "mode"]
    with open(tmp_path / "estimates_seed0.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["t", "estimator", "r_hat", "l_hat", "lambda_hat", "quality"]
    raw = (tmp_path / "estimates_seed0.csv").read_bytes()
    assert b"\r\n" not in raw
    names = {p.name for p in res.files}
    assert {"rmse.csv", "config_resolved.cfg", "observability.csv", "snr_seed0.csv"} <= names


def test_ratio_rows_match_tables(tmp_path):
    cfg = with_seeds(load_preset("valve"), [0, 1])
    run_experiment(cfg, out_dir=tmp_path, write_traces=False)
    rows = list(csv.DictReader(open(tmp_path / "rmse.csv", newline="")))
    for w in ("first", "after"):
        get = {(r["estimator"], r["stat"]): r for r in rows if r["window"] == w}
        for col in ("rmse_r", "rmse_l", "rmse_lambda"):
            s = float(get[("semera", "mean")][col])
            i = float(get[("integral", "mean")][col])
            assert float(get[("ratio_s_over_i", "mean")][col]) == pytest.approx(s / i, rel=1e-12)


def test_single_cycle_has_insufficient_after_window(tmp_path):
    cfg = replace(with_seeds(load_preset("valve"), [0]), waveform=DriveWaveform(n_cycles=1))
    res = run_experiment(cfg, out_dir=tmp_path, write_traces=False)
    assert res.mean["first"] is not None
    assert res.mean["after"] is None and res.ratio("after") is None
    text = (tmp_path / "rmse.csv").read_text()
    assert "after,all,mean,insufficient_data,insufficient_data,insufficient_data,1" in text


def test_noiseless_valve_both_converge():
    cfg = replace(load_preset("valve"), noise=NoiseSpec())
    res = run_seed(cfg, 0, keep=True)
    t = res.trace.t[1:]
    for name in ("semera", "integral"):
        e = res.estimates[name]
        sel = (t > cfg.split_time) & e.hq
        assert np.max(np.abs(e.r_hat[sel] / 79.0 - 1)) < 1e-3


def test_relay_preset_converges():
    cfg = load_preset("relay")
    res = run_seed(cfg, 0, keep=True)
    t = res.trace.t[1:]
    e = res.estimates["semera"]
    assert np.max(np.abs(e.r_hat[t > cfg.split_time] / 1590.0 - 1)) < 0.01


def test_determinism_byte_identical(tmp_path):
    cfg = with_seeds(load_preset("valve"), [7])
    a = run_experiment(cfg, out_dir=tmp_path / "a")
    b = run_experiment(cfg, out_dir=tmp_path / "b")
    for pa, pb in zip(a.files, b.files):
        assert pa.name == pb.name
        assert pa.read_bytes() == pb.read_bytes()


def test_parallel_matches_serial():
    cfg = with_seeds(load_preset("valve"), [0, 1, 2])
    a = run_experiment(cfg)
    b = run_experiment(cfg, jobs=2)
    assert a.mean == b.mean and a.std == b.std


def test_replay_bit_exact(tmp_path):
    cfg = with_seeds(load_preset("valve"), [2])
    res = run_seed(cfg, 2, keep=True)
    tr = res.trace
    p = tmp_path / "in.csv"
    io.write_input_csv(p, tr.t, tr.u, tr.iota)
    est = replay(p, cfg, out_csv=tmp_path / "est.csv")
    for name, s in res.estimates.items():
        for col in ("t", "r_hat", "l_hat", "lambda_hat", "hq"):
            np.testing.assert_array_equal(getattr(est[name], col), getattr(s, col))
    back = io.read_estimates_csv(tmp_path / "est.csv")
    np.testing.assert_array_equal(back["semera"][1], res.estimates["semera"].r_hat)


def test_replay_rejects_wrong_period(tmp_path):
    p = tmp_path / "in.csv"
    io.write_input_csv(p, np.arange(10) * 1e-4, np.zeros(10), np.zeros(10))
    with pytest.raises(SchemaError):
        replay(p, "valve")


def test_bench_minimum_iterations():
    with pytest.raises(ValueError):
        bench_step(MIN_ITERATIONS - 1)
    res = bench_step(MIN_ITERATIONS)
    assert res.filter.iterations == MIN_ITERATIONS
    assert res.filter.median_ns > 0 and res.integral.p99_ns >= res.integral.median_ns


def test_cli_simulate_estimate_obs(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.main(["simulate", "--seed", "3", "--out-dir", out]) == 0
    assert (tmp_path / "trace_seed3.csv").exists()
    assert cli.main(["estimate", "--input", str(tmp_path / "input_seed3.csv"), "--out-dir", out]) == 0
    assert (tmp_path / "input_seed3_estimates.csv").exists()
    assert cli.main(["obs", "--out-dir", out, "--seed", "3"]) == 0
    assert cli.main(["obs", "--input", str(tmp_path / "input_seed3.csv"), "--out-dir", out]) == 0
    assert cli.main(["compare", "--seed", "0", "--out-dir", out, "--no-traces"]) == 0
    assert "ratio S/I" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    bad_cfg = write(tmp_path / "bad.cfg", "filter.delta = zero\n")
    assert cli.main(["simulate", "--config", str(bad_cfg), "--out-dir", str(tmp_path)]) == 3
    bad_csv = write(tmp_path / "bad.csv", "t,u,iota\n0,1\n")
    assert cli.main(["estimate", "--input", str(bad_csv), "--out-dir", str(tmp_path)]) == 4
    empty = write(tmp_path / "empty.csv", "")
    assert cli.main(["estimate", "--input", str(empty), "--out-dir", str(tmp_path)]) == 4
    zero = tmp_path / "zero.csv"
    n = 1601
    u = np.where(((np.arange(n) - 1) % 400) < 200, 30.0, 0.0)
    u[0] = 0.0
    io.write_input_csv(zero, np.arange(n) * 50e-6, u, np.zeros(n))
    assert cli.main(["estimate", "--input", str(zero), "--out-dir", str(tmp_path)]) == 5
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench", "--iterations", "10"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_simulate_matches_trace_file(tmp_path):
    tr = simulate(seed=0)
    io.write_trace_csv(tmp_path / "t.csv", tr)
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 2], tr.i)
    np.testing.assert_array_equal(data[:, 7], tr.lam)


def test_integral_cheaper_than_filter_per_sample():
    # per-call medians are dominated by interpreter overhead; the batch loops
    # show the arithmetic cost of each estimator
    res = bench_step(MIN_ITERATIONS)
    assert res.integral_batch_ns < res.filter_batch_ns


def test_noiseless_flux_error_floor_is_shared():
    # with no noise both estimators carry the same rectangle-rule flux bias,
    # so the after-first-operation flux RMSE ratio sits near one
    cfg = with_seeds(replace(load_preset("valve"), noise=NoiseSpec()), [0])
    res = run_experiment(cfg)
    s, i = res.mean["after"]["semera"][2], res.mean["after"]["integral"][2]
    assert 0.4e-3 < s < 0.5e-3
    assert abs(s / i - 1) < 0.05
