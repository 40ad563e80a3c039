"""CLI: flags, config precedence, output modes, exit codes."""

import json

import pytest
from click.testing import CliRunner

from warpsim.cli import main
from warpsim.harness import CSV_HEADER


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


def test_single_run_prints_rows_and_stats(runner):
    res = invoke(runner, "run", "--bench", "vecadd", "--variant", "full",
                 "--point", "256")
    assert res.exit_code == 0
    assert "vecadd" in res.output
    assert "issue_hist" in res.output
    assert "bank_conflicts" in res.output


def test_json_output_carries_config_and_rows(runner):
    res = invoke(runner, "run", "--bench", "vecadd", "--variant", "base",
                 "--point", "64", "--json", "--warps", "2", "--threads", "4")
    assert res.exit_code == 0
    body = json.loads(res.output)
    assert body["config"]["warps"] == 2
    assert body["rows"][0]["T"] == 4


def test_csv_file_matches_schema(runner, tmp_path):
    out = tmp_path / "rows.csv"
    res = invoke(runner, "run", "--bench", "saxpy", "--variant", "full",
                 "--point", "256", "--csv", str(out))
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3


def test_trace_writes_one_line_per_instruction(runner, tmp_path):
    out = tmp_path / "trace.txt"
    res = invoke(runner, "run", "--bench", "vecadd", "--variant", "base",
                 "--point", "64", "--trace", str(out), "--json")
    assert res.exit_code == 0
    body = json.loads(res.output)
    assert len(out.read_text().splitlines()) == body["stats"]["instrs"]


def test_trace_requires_single_selection(runner, tmp_path):
    res = runner.invoke(main, ["run", "--bench", "vecadd",
                               "--trace", str(tmp_path / "t.txt")])
    assert res.exit_code == 2


def test_config_file_and_flag_precedence(runner, tmp_path):
    cfg = tmp_path / "hw.cfg"
    cfg.write_text("# comment\nwarps = 4\nthreads = 8\ncache_ports = 2\n")
    res = invoke(runner, "run", "--bench", "vecadd", "--variant", "base",
                 "--point", "64", "--config", str(cfg), "--threads", "4",
                 "--json")
    assert res.exit_code == 0
    conf = json.loads(res.output)["config"]
    assert conf["warps"] == 4          # from file
    assert conf["threads"] == 4        # flag wins
    assert conf["cache_ports"] == 2


def test_bad_config_file_exits_2(runner, tmp_path):
    cfg = tmp_path / "hw.cfg"
    cfg.write_text("warps 4\n")
    res = runner.invoke(main, ["run", "--bench", "vecadd", "--point", "64",
                               "--config", str(cfg)])
    assert res.exit_code == 2
    cfg.write_text("lanes = 4\n")
    res = runner.invoke(main, ["run", "--bench", "vecadd", "--point", "64",
                               "--config", str(cfg)])
    assert res.exit_code == 2


def test_unsupported_variant_exits_2(runner):
    res = runner.invoke(main, ["run", "--bench", "gcn_aggr",
                               "--variant", "full", "--point", "64"])
    assert res.exit_code == 2
    assert "gcn_aggr" in res.output


def test_unknown_bench_exits_2(runner):
    res = runner.invoke(main, ["run", "--bench", "fft"])
    assert res.exit_code == 2


def test_sweep_and_point_conflict(runner):
    res = runner.invoke(main, ["run", "--bench", "vecadd", "--sweep",
                               "--point", "64"])
    assert res.exit_code == 2


def test_invalid_shape_exits_2(runner):
    res = runner.invoke(main, ["run", "--bench", "vecadd", "--point", "64",
                               "--threads", "10"])
    assert res.exit_code == 2


def test_benchmarks_listing(runner):
    res = invoke(runner, "benchmarks")
    assert res.exit_code == 0
    assert "gcn_aggr" in res.output
    assert "cfm+lps" in res.output


def test_reproduce_port_sweep(runner, tmp_path):
    out = tmp_path / "ports.csv"
    res = invoke(runner, "reproduce", "--paper-fig", "9",
                 "--csv", str(out))
    assert res.exit_code == 0
    assert "P=1" in res.output and "P=3" in res.output
    header = out.read_text().splitlines()[0]
    assert header == "P,cycles,bank_conflicts,mshr_stalls,speedup_vs_p1"


def test_reproduce_requires_known_fig(runner):
    res = runner.invoke(main, ["reproduce", "--paper-fig", "7"])
    assert res.exit_code == 2
