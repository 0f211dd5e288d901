import json

import pytest

from cbsep_lab.cli import main
from cbsep_lab.graph import make_family
from cbsep_lab.rwstats import cover_quantile_exact

import oracles


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spectral_gap_matches_oracle(capsys):
    code, out, _ = run(capsys, "spectral", "--graph", "cycle:4", "--p", "0.3", "--restarts", "3")
    body = json.loads(out)
    Q, mu, _ = oracles.cbsep_dense(4, make_family("cycle", 4).edges, 0.3)
    assert code == 0 and body["n_states"] == 15
    assert body["gap"] == pytest.approx(oracles.dense_gap(Q, mu), rel=1e-9)
    assert body["t_rel"] == pytest.approx(1 / body["gap"])
    lo, hi = body["alpha_bracket"]
    assert lo <= body["alpha_witness"] <= hi * (1 + 1e-9)
    assert body["t_mix"] <= body["T2"]


@pytest.mark.parametrize("model", ["fa1f", "gcbsep"])
def test_spectral_other_models(capsys, model):
    code, out, _ = run(capsys, "spectral", "--model", model, "--graph", "path:3", "--p", "0.3", "--restarts", "2")
    body = json.loads(out)
    assert code == 0 and body["gap"] > 0
    assert body["n_states"] == (7 if model == "fa1f" else 3**3 - 2**3)


def test_rwstats_subcommand(capsys):
    _, out, _ = run(capsys, "rwstats", "--graph", "cycle:6", "--what", "tmeet")
    assert json.loads(out) == {"value": pytest.approx(1.4583333333333337), "method": "exact", "stderr": 0.0}
    _, out, _ = run(capsys, "rwstats", "--graph", "cycle:8", "--what", "tmix")
    assert json.loads(out)["value"] == 6
    _, out, _ = run(capsys, "rwstats", "--graph", "cycle:6", "--what", "tcov")
    assert json.loads(out)["value"] == cover_quantile_exact(make_family("cycle", 6))
    _, out, _ = run(capsys, "rwstats", "--graph", "complete:2", "--what", "tcov", "--kind", "continuous",
                    "--samples", "500", "--seed", "3")
    body = json.loads(out)
    assert body["method"] == "mc" and body["band"][0] <= body["value"] <= body["band"][1]


def test_resistance_subcommand(capsys):
    _, out, _ = run(capsys, "resistance", "--graph", "cycle:4", "--x", "0", "--y", "1")
    lines = out.strip().splitlines()
    assert lines[0] == "x,y,R" and float(lines[1].split(",")[2]) == pytest.approx(0.75)
    _, out, _ = run(capsys, "resistance", "--graph", "cycle:4")
    assert len(out.strip().splitlines()) == 1 + 6
    _, out, _ = run(capsys, "resistance", "--graph", "path:3", "--profile")
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    assert [float(r[1]) for r in rows] == pytest.approx([1.0, 2 / 3, 1.0])


def test_birthdeath_subcommand(capsys):
    _, out, _ = run(capsys, "birthdeath", "--n", "2", "--p", "0.5", "--restarts", "1")
    body = json.loads(out)
    assert body["C_plus"] == 0.0 and body["C_star"] == body["C_minus"]
    assert body["best_witness"] > 0


@pytest.mark.parametrize("model", ["cbsep", "gcbsep", "csep"])
def test_simulate_csv(capsys, model):
    argv = ["simulate", "--model", model, "--graph", "cycle:5", "--p", "0.3", "--horizon", "5",
            "--replicas", "3", "--seed", "7", "--checkpoints", "4"]
    _, out, _ = run(capsys, *argv)
    _, again, _ = run(capsys, *argv)
    assert out == again
    lines = out.strip().splitlines()
    assert lines[0] == "replica,observable,value"
    per_replica = 5 + (2 if model == "cbsep" else 1)
    assert len(lines) == 1 + 3 * per_replica
    rows = [line.split(",") for line in lines[1:]]
    assert all(r[1] != "N(0)" or r[2] == "5" for r in rows)
    if model == "csep":
        counts = [int(r[2]) for r in rows if r[0] == "0" and r[1].startswith("N(")]
        assert counts == sorted(counts, reverse=True)


def _config(tmp_path, **extra):
    path = tmp_path / "cfg.json"
    body = {"family": "path", "sizes": [2, 3], "p_rule": ["0.3"], "replicas": 5}
    body.update(extra)
    path.write_text(json.dumps(body))
    return str(path)


def test_verify_exit_codes_and_snapshots(capsys, tmp_path):
    cfg = _config(tmp_path)
    out_path = tmp_path / "report.json"
    snaps = tmp_path / "snaps.json"
    code, _, _ = run(capsys, "verify", "--config", cfg, "--out", str(out_path), "--no-snapshots",
                     "--write-snapshots", str(snaps))
    assert code == 0 and json.loads(out_path.read_text())["passed"] is True
    written = json.loads(snaps.read_text())
    assert written
    # merge keeps foreign keys
    snaps.write_text(json.dumps(dict(written, **{"other|ratio_over_bound|x": 1.0})))
    run(capsys, "verify", "--config", cfg, "--out", str(out_path), "--no-snapshots", "--write-snapshots", str(snaps))
    assert "other|ratio_over_bound|x" in json.loads(snaps.read_text())
    # a snapshot far below the measured constant fails the run
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({k: v / 10 for k, v in written.items()}))
    code, _, err = run(capsys, "verify", "--config", cfg, "--out", str(out_path), "--snapshots", str(bad))
    assert code == 1 and "FAIL rate_constants" in err


def test_verify_prints_report_without_out(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--config", _config(tmp_path, sizes=[2]), "--no-snapshots")
    assert code == 0 and json.loads(out)["passed"] is True


def test_scaling_subcommand(capsys, tmp_path):
    cfg = _config(tmp_path, family="cycle", sizes=[4, 5, 6, 7], p_rule=["1/n"], replicas=0)
    table = tmp_path / "t.dat"
    code, out, _ = run(capsys, "scaling", "--config", cfg, "--out", str(table))
    body = json.loads(out)
    assert code == 0 and len(body["table"]) == 4 and body["exponent"] > 0
    lines = table.read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 5


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["spectral", "--graph", "cycle:4"])
