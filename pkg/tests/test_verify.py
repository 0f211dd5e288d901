import json
import math

import numpy as np
import pytest

from cbsep_lab.graph import make_family
from cbsep_lab.spectral import SizeError, cbsep_generator, relaxation_time
from cbsep_lab.verify import (
    ANCHORS,
    CheckRecord,
    ExperimentConfig,
    VerificationReport,
    claim52_check,
    compare_snapshots,
    eval_p_rule,
    example_rho,
    fa_chain_check,
    instance_checks,
    level_increment_check,
    load_snapshots,
    one_particle_witness,
    report_constants,
    scaling_fit,
    theorem3_check,
    verify_suite,
)

import oracles


def test_p_rules():
    assert eval_p_rule("0.3", 5) == 0.3
    assert eval_p_rule(0.5, 5) == 0.5
    assert eval_p_rule("1/n", 4) == 0.25
    assert eval_p_rule("2/n", 8) == 0.25
    assert eval_p_rule(" 0.5 / n ", 5) == 0.1
    for rule, n in [("3/n", 2), ("1.5", 4), ("0", 3)]:
        with pytest.raises(ValueError):
            eval_p_rule(rule, n)


def test_config_parsing(tmp_path):
    cfg = ExperimentConfig.from_dict({"family": "torus:2", "sizes": [3], "p_rule": "1/n", "seeds": 4})
    assert cfg.p_rule == ["1/n"] and cfg.seeds == [4]
    (G, p), = cfg.instances()
    assert G.edges == make_family("torus", 3, 2).edges and p == pytest.approx(1 / 9)
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"family": "cycle", "sizes": [3, 4], "p_rule": ["0.3", "1/n"]}))
    assert len(list(ExperimentConfig.from_file(path).instances())) == 4
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "cycle", "sizes": [3], "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "cycle", "sizes": [3], "model": "voter"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "path", "sizes": [2], "p_rule": ["3/n"]})


def test_bundled_configs_parse():
    from pathlib import Path
    for path in sorted((Path(__file__).parent.parent / "configs").glob("*.json")):
        ExperimentConfig.from_file(path)


# ------------------------------------------------------------ single checks


def test_instance_checks_pass_and_are_anchored():
    recs = instance_checks(make_family("path", 3), 0.3, replicas=10)
    names = {r.name for r in recs}
    assert {"generator_identities", "poincare_logsob_sandwich", "l2_mixing_sandwich", "tmix_below_T2",
            "entropy_decomposition", "level_increments", "single_flip_vs_dirichlet", "one_particle_witness",
            "killed_chain_hitting", "projection_lower_bound", "mixture_law", "fa_chain",
            "pathwise_coupling"} <= names
    for r in recs:
        assert r.anchor == ANCHORS[r.name]
        assert r.passed is not False, r


@pytest.mark.parametrize("spec", [("path", 2), ("cycle", 4), ("complete", 5), ("bary_tree", 2, 1)])
def test_level_increments_against_enumeration(spec):
    G = make_family(*spec)
    p = 0.27
    S = oracles.states_plus(G.n)
    mu = oracles.bernoulli(S, p)
    idx = {s: i for i, s in enumerate(S)}
    f = np.random.default_rng(1).standard_normal(len(S))
    g = {}
    for k in range(1, G.n + 1):
        lvl = [i for i, s in enumerate(S) if sum(s) == k]
        g[k] = math.sqrt(sum(mu[i] * f[i] ** 2 for i in lvl) / sum(mu[i] for i in lvl))
    lhs, rhs = level_increment_check(G, p, f)
    for k in range(2, G.n + 1):
        lvl = [i for i, s in enumerate(S) if sum(s) == k - 1]
        tot = 0.0
        for i in lvl:
            s = S[i]
            for y in range(G.n):
                if s[y] == 0:
                    t = list(s)
                    t[y] = 1
                    tot += mu[i] * (f[i] - f[idx[tuple(t)]]) ** 2
        tot /= sum(mu[i] for i in lvl)
        assert lhs[k - 2] == pytest.approx((g[k] - g[k - 1]) ** 2, rel=1e-12, abs=1e-15)
        assert rhs[k - 2] == pytest.approx(2 / (G.n - k + 1) * tot, rel=1e-12)
        assert lhs[k - 2] <= rhs[k - 2]


def test_one_particle_witness_closed_forms():
    w = one_particle_witness(make_family("cycle", 5), 0.2)
    assert w["ent_over_D"] == pytest.approx(w["ent_over_D_closed"], rel=1e-10)
    assert w["var_over_D"] == pytest.approx(w["var_over_D_closed"], rel=1e-10)


def test_mixture_law_trivial_cases():
    G = make_family("path", 3)
    assert claim52_check(G, example_rho(0.3), {1}, [0.0]) == 0.0
    assert claim52_check(G, [0.7, 0.3], {1}, [0.0, 0.5, 2.0]) < 1e-12
    assert claim52_check(G, example_rho(0.3), {1}, [0.5, 1.0]) < 1e-10
    with pytest.raises(SizeError):
        claim52_check(make_family("cycle", 9), example_rho(0.3), {1}, [1.0])


def test_projection_bound_binary_alphabet_is_equality():
    rec = theorem3_check(make_family("cycle", 4), [0.7, 0.3], {1})
    assert rec.tmix_gcbsep == pytest.approx(rec.tmix_cbsep, rel=1e-8)
    rec = theorem3_check(make_family("cycle", 4), example_rho(0.3), {1})
    assert rec.tmix_cbsep <= rec.tmix_gcbsep * (1 + 1e-8)


def test_fa_chain_fields():
    out = fa_chain_check(make_family("path", 2), 0.1, (1.0, 10.0))
    assert out["tmix_le_T2"] and out["T2_lower_ok"] and out["T2_upper_ok"]
    assert out["C_FA_witness"] > 0 and out["c_last_link"] > 0


# ------------------------------------------------------------ reports and snapshots


SMALL = {"family": "path", "sizes": [2, 3], "p_rule": ["0.3"], "replicas": 10}


def test_report_deterministic_and_passing():
    cfg = ExperimentConfig.from_dict(SMALL)
    a, b = verify_suite(cfg), verify_suite(cfg)
    assert a.to_json() == b.to_json()
    assert a.passed and not a.failures()
    body = json.loads(a.to_json())
    assert body["passed"] is True and len(body["records"]) == len(a.records)


def test_report_flags_hard_failures_only():
    rep = VerificationReport()
    rep.add(CheckRecord("x", "a", "i", {}, None))
    rep.add(CheckRecord("y", "a", "i", {}, False, hard=False))
    assert rep.passed
    rep.add(CheckRecord("z", "a", "i", {"v": math.inf}, False))
    assert not rep.passed and [r.name for r in rep.failures()] == ["z"]
    assert json.loads(rep.to_json())["records"][2]["measured"]["v"] == "inf"


def test_snapshot_drift_detection():
    rep = verify_suite(ExperimentConfig.from_dict(SMALL))
    consts = report_constants(rep)
    assert consts and all(v > 0 for v in consts.values())
    assert compare_snapshots(rep, consts) == []
    up = next(k for k in consts if k.split("|")[1] == "ratio_over_bound")
    down = next(k for k in consts if k.split("|")[1] == "C_witness_d_avg_over_n")
    shifted = dict(consts, **{up: consts[up] / 3, down: consts[down] * 3})
    assert sorted(compare_snapshots(rep, shifted)) == sorted([up, down])
    # moving in the favourable direction is fine
    relaxed = dict(consts, **{up: consts[up] * 3, down: consts[down] / 3})
    assert compare_snapshots(rep, relaxed) == []
    assert compare_snapshots(rep, dict(consts, **{up: -1.0})) == [up]
    failing = verify_suite(ExperimentConfig.from_dict(SMALL), snapshots=shifted)
    assert not failing.passed


def test_bundled_snapshots_cover_reference_configs():
    snaps = load_snapshots()
    assert snaps and all(v > 0 for v in snaps.values())
    assert any(k.startswith("rate_constants|") and "cycle(6)" in k for k in snaps)


# ------------------------------------------------------------ scaling


def test_scaling_fit_guards():
    with pytest.raises(ValueError):
        scaling_fit(ExperimentConfig("cycle", [4, 5, 6]))
    with pytest.raises(ValueError):
        scaling_fit(ExperimentConfig("cycle", [4, 5, 6, 7], model="csep"))
    with pytest.raises(SizeError):
        scaling_fit(ExperimentConfig("cycle", [4, 5, 6, 21]))


def test_scaling_fit_table():
    fit = scaling_fit(ExperimentConfig("cycle", [4, 6, 8, 10], ["1/n"], replicas=0))
    assert [row[0] for row in fit.table] == [4, 6, 8, 10]
    assert [row[2] for row in fit.table] == [2**n - 1 for n in (4, 6, 8, 10)]
    assert fit.exponent > 1 and fit.stderr >= 0


@pytest.mark.parametrize("n", range(3, 11))
def test_complete_graph_relaxation_stays_bounded(n):
    G = make_family("complete", n)
    for p in (0.3, 1 / n):
        assert relaxation_time(cbsep_generator(G, p)) <= 1.0
