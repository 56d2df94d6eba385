import csv
import io
from dataclasses import replace

import pytest

from dhaiq.cli import main
from dhaiq.experiment import CSV_COLUMNS, ScenarioConfig, parse_config, run_scenario, sweep, to_csv
from dhaiq.topology import ConfigError

SMALL = ["--set", "W=200", "--set", "r=50", "--n", "60", "--z0", "3", "--runs", "2"]


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_config_comments_and_types():
    cfg = parse_config("# scenario\nn = 120\nW=300  # side\nshift = on\nsigma = 40\nmean_x = none\n\n")
    assert (cfg.n, cfg.W, cfg.shift, cfg.sigma, cfg.mean_x) == (120, 300.0, True, 40.0, None)
    assert cfg.r == 50 and cfg.mu == 5 and cfg.runs_per_point == 30


@pytest.mark.parametrize("text", ["n 5", "bogus = 1", "n = many", "shift = maybe"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_validate_lists_every_problem():
    with pytest.raises(ConfigError) as err:
        ScenarioConfig(n=10, z0=11, r=-1, dist="ring").validate()
    msg = str(err.value)
    assert "z0" in msg and "r must" in msg and "dist" in msg


def test_csv_schema_and_precision():
    rows = [dict(n=400, z0=5, dist="uniform", shift="off", mean_innocent=1 / 3, sd_innocent=0.0,
                 mean_catch=1.0, sd_catch=0.0, mean_tx=12345678.0, mean_rounds=20.0, seeds=30)]
    lines = to_csv(rows).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "400,5,uniform,off,0.333333,0,1,0,1.23457e+07,20,30"


def test_run_writes_one_row(tmp_path, capsys):
    assert main(["run", *SMALL, "--seed", "3"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 1
    row = rows[0]
    assert (row["n"], row["z0"], row["shift"], row["seeds"]) == ("60", "3", "off", "2")
    assert 0 <= float(row["mean_innocent"]) <= 1 and 0 <= float(row["mean_catch"]) <= 1


def test_run_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["run", *SMALL, "--shift", "on", "--seed", "11", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_from_config_file_with_trace(tmp_path):
    conf = tmp_path / "s.conf"
    conf.write_text("n = 60\nW = 200\nz0 = 3\nruns_per_point = 1\n")
    trace = tmp_path / "trace.txt"
    out = tmp_path / "out.csv"
    assert main(["run", "--config", str(conf), "--trace", str(trace), "--out", str(out)]) == 0
    assert read_csv(out.read_text())[0]["seeds"] == "1"
    assert trace.read_text().startswith("#")


def test_invalid_config_exits_nonzero_without_output(tmp_path, capsys):
    out = tmp_path / "out.csv"
    code = main(["run", "--n", "10", "--z0", "20", "--out", str(out)])
    captured = capsys.readouterr()
    assert code != 0
    assert not out.exists() and captured.out == ""
    assert "z0" in captured.err


def test_sweep_rows_and_order(capsys):
    assert main(["sweep", *SMALL[:4], "--runs", "1", "--n-list", "40,60", "--z0-list", "0,2", "--dist", "both"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 2 * 2 * 2 * 2
    keys = [(r["n"], r["dist"], r["shift"], r["z0"]) for r in rows]
    assert keys[:4] == [("40", "uniform", "off", "0"), ("40", "uniform", "off", "2"),
                        ("40", "uniform", "on", "0"), ("40", "uniform", "on", "2")]
    zero = [r for r in rows if r["z0"] == "0"]
    assert all(r["mean_innocent"] == "0" and r["mean_catch"] == "1" for r in zero)


def test_sweep_plot(tmp_path):
    pytest.importorskip("matplotlib")
    svg = tmp_path / "curves.svg"
    out = tmp_path / "s.csv"
    assert main(["sweep", *SMALL[:4], "--runs", "1", "--z0-list", "1,2", "--shift", "off",
                 "--out", str(out), "--plot", str(svg)]) == 0
    assert "<svg" in svg.read_text()


def test_shift_pairs_with_unshifted_run():
    cfg = ScenarioConfig(n=60, W=200, z0=3, runs_per_point=3)
    off = run_scenario(cfg)
    on = run_scenario(replace(cfg, shift=True))
    # the first shifted run sees the same placement and rng as the plain run
    for a, b in zip(off.rows, on.rows):
        final = set(b.metrics.marked)
        assert final <= set(a.metrics.marked)


def test_sweep_rejects_empty_lists():
    with pytest.raises(ConfigError):
        sweep(ScenarioConfig(), [], [400])


def test_verify_claim(capsys):
    assert main(["verify-claim", "--k-list", "1,3,6,7,8", "--resolution", "0.05"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("k,")
    assert [ln.split(",")[-2:] for ln in lines[1:]] == [
        ["max", "yes"], ["max", "yes"], ["max", "yes"], ["boundary", "yes"], ["not-max", "yes"]]
    assert lines[2].split(",")[1:6] == ["0.25", "0.25", "0.25", "0.25", "0"]


def test_verify_claim_bad_k(capsys):
    assert main(["verify-claim", "--k-list", "0"]) == 2


def test_bound(capsys):
    assert main(["bound", "--n", "400", "--z0", "10"]) == 0
    assert capsys.readouterr().out.strip() == "mu=5 z0=10 n=400 bound=0.1"


def test_export_topology(tmp_path):
    out = tmp_path / "nodes.txt"
    assert main(["export-topology", *SMALL, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 61
    assert sum(ln.endswith(" 1") for ln in lines[1:]) == 3
    adj = (tmp_path / "nodes.txt.adj").read_text().splitlines()
    assert len(adj) == 61 and adj[1].startswith("0:")
