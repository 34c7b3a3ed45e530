import json
import math

import numpy as np
import pytest

from ccbf import cli, harness
from ccbf.harness import (
    ExperimentConfig,
    PopularitySpec,
    ResultRow,
    emit_results,
    smallnet_config,
    format_eta,
    parse_eta,
    read_results,
    rounded,
    run_sweep,
    run_trial,
    summarize,
)
from ccbf.scenario import ConfigError, Scenario, watt_to_dbm


def small(**kw):
    base = dict(n_trials=2, algorithms=("g_ccp", "full_coop"), etas=(1.0, math.inf), base_seed=11)
    base.update(kw)
    return smallnet_config(**base)


def test_eta_parsing():
    assert parse_eta("power-only") == math.inf
    assert parse_eta("inf") == math.inf
    assert parse_eta("0.1") == 0.1
    assert format_eta(math.inf) == "power-only"
    assert format_eta(2.0) == 2.0


def test_dbm_conversion():
    assert watt_to_dbm(1.0) == pytest.approx(30.0)
    assert watt_to_dbm(1e-3) == pytest.approx(0.0)


def test_config_roundtrip(tmp_path):
    cfg = small(popularity=PopularitySpec("zipf", alpha=0.8))
    p = tmp_path / "cfg.json"
    cfg.save(p)
    back = ExperimentConfig.load(p)
    assert back == cfg
    assert back.etas[-1] == math.inf


def test_config_validation():
    with pytest.raises((ConfigError, ValueError)):
        small(algorithms=("nope",))
    with pytest.raises((ConfigError, ValueError)):
        small(strategy="XYZ")
    with pytest.raises((ConfigError, ValueError)):
        small(n_trials=0)
    with pytest.raises(ConfigError):
        PopularitySpec("explicit", probs=(0.5, 0.5)).build(3)


def test_trial_rows_structure():
    cfg = small()
    rows = run_trial(cfg, 0)
    assert len(rows) == len(cfg.algorithms) * len(cfg.etas)
    assert len({r.scenario_hash for r in rows}) == 1
    for r in rows:
        assert isinstance(r, ResultRow)
        assert r.feasible and r.status == "ok"
        assert r.min_sinr_margin >= 1 - 1e-5
        assert r.wall_time is None
        assert r.power_dbm == pytest.approx(watt_to_dbm(r.power_w))
        if math.isinf(r.eta):
            assert r.total_cost == r.power_w
        else:
            assert r.total_cost == pytest.approx(r.backhaul_bps / 1e6 + r.eta * r.power_w)
    # power-only power equals full-cooperation power minimisation
    po = {r.algorithm: r.power_w for r in rows if math.isinf(r.eta)}
    assert po["g_ccp"] == pytest.approx(po["full_coop"], rel=1e-3)


def test_trial_is_deterministic():
    cfg = small(n_trials=1)
    a = [rounded(r) for r in run_trial(cfg, 0)]
    b = [rounded(r) for r in run_trial(cfg, 0)]
    assert a == b


def test_infeasible_instance_gets_rows():
    cfg = small(radio=harness.RadioConfig(n_bs=1, n_ant=1, n_users=6, n_contents=4, sinr_target=30.0))
    rows = run_trial(cfg, 0)
    assert rows and all(not r.feasible for r in rows)
    assert all(r.status.startswith("infeasible") for r in rows)
    s = summarize(rows)
    assert all(x.n_feasible == 0 and x.mean_power_w is None for x in s)


@pytest.mark.parametrize("fmt,suffix", [("csv", ".csv"), ("jsonl", ".jsonl")])
def test_emit_read_roundtrip(tmp_path, fmt, suffix):
    rows, summary = run_sweep(small(n_trials=1))
    p = emit_results(rows, tmp_path / ("r" + suffix), fmt)
    back = read_results(p)
    assert back == [rounded(r) for r in rows]
    q = emit_results(summary, tmp_path / ("s" + suffix), fmt)
    assert read_results(q, row_type=harness.SummaryRow) == [rounded(s) for s in summary]


def test_empty_csv_is_header_only(tmp_path):
    p = emit_results([], tmp_path / "e.csv")
    assert p.read_text().strip() == ",".join(harness.COLUMNS)
    assert read_results(p) == []


def test_summary_means():
    rows, summary = run_sweep(small())
    for s in summary:
        mine = [r for r in rows if (r.algorithm, r.eta) == (s.algorithm, s.eta) and r.feasible]
        assert s.n_feasible == len(mine)
        assert s.mean_power_w == pytest.approx(np.mean([r.power_w for r in mine]))


def test_parallel_matches_serial(tmp_path):
    a, _ = run_sweep(small(jobs=1))
    b, _ = run_sweep(small(jobs=2))
    pa = emit_results(a, tmp_path / "a.csv")
    pb = emit_results(b, tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()


# --------------------------------------------------------------------------
# CLI


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_generate_and_solve(tmp_path, capsys):
    scen = tmp_path / "s.json"
    common = ["--seed", 3, "--jobs", 1, "--n-bs", 3, "--n-ant", 2, "--n-users", 4, "--n-contents", 3, "--cache-size", 1]
    assert run_cli("generate", *common, "--out", scen) == cli.EXIT_OK
    sc = Scenario.load(scen)
    assert sc.N == 3 and sc.L == 2
    out = tmp_path / "sol.json"
    code = run_cli("solve", *common, "--out", out, "--scenario", scen, "--algorithm", "g_ccp", "--eta", "power-only")
    assert code == cli.EXIT_OK
    res = json.loads(out.read_text())
    assert res["feasible"] and res["eta"] == "power-only"
    assert res["total_cost"] == pytest.approx(res["power_w"])


def test_cli_infeasible_exit_code(tmp_path):
    out = tmp_path / "x.json"
    code = run_cli("solve", "--seed", 0, "--jobs", 1, "--out", out, "--n-bs", 1, "--n-ant", 1,
                   "--n-users", 6, "--n-contents", 4, "--cache-size", 1, "--sinr-db", 30)
    assert code == cli.EXIT_INFEASIBLE
    assert json.loads(out.read_text())["feasible"] is False


def test_cli_error_exit_code(tmp_path, capsys):
    code = run_cli("sweep", "--seed", 0, "--jobs", 1, "--out", tmp_path / "x.csv", "--n-bs", 0)
    assert code == cli.EXIT_ERROR
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        run_cli("sweep", "--out", tmp_path / "x.csv")  # --seed and --jobs are required


def test_cli_sweep_writes_rows_and_summary(tmp_path):
    out = tmp_path / "sw.csv"
    cfg = tmp_path / "cfg.json"
    small(n_trials=1).save(cfg)
    code = run_cli("sweep", "--seed", 5, "--jobs", 1, "--out", out, "--config", cfg, "--etas", "1,power-only")
    assert code == cli.EXIT_OK
    rows = read_results(out)
    assert len(rows) == 4 and {r.seed for r in rows} == {harness.trial_seed(5, 0)}
    assert (tmp_path / "sw.summary.csv").exists()
