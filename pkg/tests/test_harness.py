import json

import numpy as np
import pytest

from dpmvs import cli
from dpmvs.archive import DrawArchive, load_archives
from dpmvs.config import ConfigError, ExperimentConfig, config_from_mapping, dump_config, load_config
from dpmvs.data import (
    Dataset,
    DatasetError,
    load_dataset,
    save_dataset,
    scenario1_true_mean,
    simulate_mixed,
    simulate_scenario1,
)
from dpmvs.experiment import rerun_from_manifest, run_experiment

SMALL = {"iterations": 40, "burn_in": 10, "conditional_iterations": 20, "conditional_burn_in": 5,
         "profiles": "1,1;1,0", "grid_points": 21, "K": 5}


def _small_data(seed=1):
    ds, _ = simulate_scenario1(seed, n_per_cluster=15)
    return ds


def _cfg(model="rpms", **kw):
    return config_from_mapping({**SMALL, "model": model, **kw})


# ------------------------------------------------------------------ config


def test_config_defaults_valid():
    cfg = ExperimentConfig().validate()
    h = cfg.hyper
    assert (cfg.iterations, cfg.burn_in) == (15000, 5000)
    assert (h.a_pi, h.b_pi, h.a_omega, h.b_omega) == (1.0, 0.15, 1.0, 0.15)
    assert (h.a_kappa, h.b_kappa, h.psbp_a_tau, h.psbp_b_tau, h.mu_xi, h.tau_xi, h.K) == (0.5, 0.5, 1.0, 5.0, 0.0, 0.1, 20)


def test_config_problems_reported_together():
    with pytest.raises(ConfigError) as e:
        config_from_mapping({"iterations": 10, "burn_in": 20, "a_pi": -1.0, "model": "nope", "bogus": 1})
    probs = "\n".join(e.value.problems)
    for frag in ("burn_in", "a_pi", "model", "bogus"):
        assert frag in probs
    assert len(e.value.problems) >= 4


def test_config_unknown_key_and_types(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('model = "psbp"\nitrations = 5\n')
    with pytest.raises(ConfigError, match="itrations"):
        load_config(p)
    with pytest.raises(ConfigError, match="integer"):
        config_from_mapping({"chains": "two"})
    with pytest.raises(ConfigError, match="nested"):
        config_from_mapping({"hyper": {"a_pi": 1.0}})


def test_config_round_trip(tmp_path):
    cfg = _cfg("pr", seed=4, a_tau=2.5, binary_columns=["x1"])
    p = tmp_path / "c.toml"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


# ------------------------------------------------------------------ data


def test_scenario1_shape_and_means():
    ds, truth = simulate_scenario1(0)
    assert ds.n == 200 and ds.D == 2
    assert np.array_equal(np.bincount(truth["assign"]), [100, 100])
    assert set(np.unique(ds.X)) <= {0.0, 1.0}
    th = truth["theta"]
    assert th[0] @ [1, 1, 1] == 17.0 and th[1] @ [1, 0, 0] == 0.0
    assert scenario1_true_mean([1, 1]) == 11.0 and scenario1_true_mean([1, 0]) == 1.5
    assert scenario1_true_mean([0, 1]) == 5.0 and scenario1_true_mean([0, 0]) == 0.0


def test_scenario1_is_seeded():
    a, _ = simulate_scenario1(3)
    b, _ = simulate_scenario1(3)
    c, _ = simulate_scenario1(4)
    assert np.array_equal(a.y, b.y) and not np.array_equal(a.y, c.y)


def test_mixed_dataset_shape():
    ds, truth = simulate_mixed(0)
    assert ds.n == 500 and ds.column_types.count("binary") == 5 and ds.column_types.count("continuous") == 5


def test_load_drops_incomplete_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x1,x2\n1.5,1,0\n2.0,,1\n-0.5,0,1\n")
    ds = load_dataset(p, binary_columns=["x1", "x2"])
    assert ds.n == 2 and ds.dropped_rows == 1
    assert np.array_equal(ds.y, [1.5, -0.5])


def test_load_bad_binary_names_row_and_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x1\n1,0\n2,2\n")
    with pytest.raises(DatasetError, match=r"'x1'.*row 2"):
        load_dataset(p, binary_columns=["x1"])


@pytest.mark.parametrize("text,match", [("y,x,x\n1,0,1\n", "duplicate"), ("z,x\n1,0\n", "response"),
                                        ("y,x\n1,abc\n", "non-numeric"), ("", "empty")])
def test_load_errors(tmp_path, text, match):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(DatasetError, match=match):
        load_dataset(p)


def test_load_missing_declared_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x\n1,0\n")
    with pytest.raises(DatasetError, match="nope"):
        load_dataset(p, binary_columns=["nope"])


def test_discretize(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,income\n1,10000\n2,30000\n3,90000\n")
    ds = load_dataset(p, discretize="income:25000,75000")
    assert ds.D == 2 and ds.column_types == ["binary", "binary"]
    assert np.array_equal(ds.X, [[0, 0], [1, 0], [0, 1]])


def test_dataset_round_trip_bit_exact(tmp_path):
    ds, _ = simulate_mixed(2, n=60)
    p = tmp_path / "d.csv"
    save_dataset(ds, p)
    back = load_dataset(p, binary_columns=[c for c, t in zip(ds.column_names, ds.column_types) if t == "binary"],
                        continuous_columns=[c for c, t in zip(ds.column_names, ds.column_types) if t == "continuous"])
    assert np.array_equal(back.y, ds.y) and np.array_equal(back.X, ds.X)
    assert back.column_types == ds.column_types


def test_dataset_rejects_non_binary():
    with pytest.raises(DatasetError):
        Dataset(np.zeros(2), np.array([[0.0], [0.5]]), ["binary"])


# ------------------------------------------------------------------ archive


def test_archive_round_trip(tmp_path):
    ds = _small_data()
    from dpmvs.chain import run_chain
    from dpmvs.experiment import make_sampler
    from dpmvs.randist import make_rng

    for model in ("rpms", "psbp", "pr"):
        arc = run_chain(make_sampler(_cfg(model), ds), make_rng(0), 15, 5)
        arc.save(tmp_path / f"{model}.csv")
        back = DrawArchive.load(tmp_path / f"{model}.csv")
        assert len(back) == 10 == back.expected_retained
        assert back.meta == json.loads(json.dumps(arc.meta))
        for r0, r1 in zip(arc.records, back.records):
            for k in arc.fields:
                assert np.array_equal(np.asarray(r0[k]), np.asarray(r1[k])), (model, k)
        head = (tmp_path / f"{model}.csv").read_text().splitlines()
        assert head[0].split(",")[0] == "iter"
        # labels are 1-based on disk
        assert min(int(v) for v in head[1].split(",")[list(arc.fields).index("assign")].split()) == 1


# ------------------------------------------------------------------ experiment


def _hashes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_run_experiment_artifacts_and_determinism(tmp_path):
    ds = _small_data()
    cfg = _cfg("rpms", chains=2, seed=5)
    summary = run_experiment(cfg, ds, tmp_path / "a")
    names = {p.name for p in (tmp_path / "a").iterdir()}
    for f in ("chain_0.csv", "chain_0.json", "chain_1.csv", "summary.json", "manifest.json",
              "predictive_0.csv", "predictive_1.csv", "conditional.csv", "data.csv"):
        assert f in names
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    for key in ("inclusion", "binder_partition", "k_posterior", "autocorrelation"):
        assert key in s
    assert len(s["autocorrelation"]) == 2
    assert set(s["autocorrelation"][0]["k"]) == {"1", "5", "10"}
    assert len(s["inclusion_by_cluster"]) == s["binder_k"] == len(set(s["binder_partition"]))
    arcs = load_archives(tmp_path / "a")
    assert len(arcs) == 2 and all(len(a) == 30 for a in arcs)
    assert (tmp_path / "a" / "chain_0.csv").read_bytes() != (tmp_path / "a" / "chain_1.csv").read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 5 and "code_version" in man and man["config"]["model"] == "rpms"
    run_experiment(cfg, ds, tmp_path / "b")
    assert _hashes(tmp_path / "a") == _hashes(tmp_path / "b")
    assert summary["predictive"][0]["profile"] == [1.0, 1.0]


def test_manifest_rerun_reproduces(tmp_path):
    ds = _small_data(2)
    run_experiment(_cfg("pr", seed=3), ds, tmp_path / "a")
    rerun_from_manifest(tmp_path / "a" / "manifest.json", tmp_path / "b")
    assert _hashes(tmp_path / "a") == _hashes(tmp_path / "b")


def test_psbp_summary_has_inclusion(tmp_path):
    summary = run_experiment(_cfg("psbp"), _small_data(), tmp_path)
    inc = summary["inclusion"]
    assert set(inc) == {"x1", "x2"} and all(0 <= v <= 1 for v in inc.values())


def test_profile_length_checked(tmp_path):
    with pytest.raises(ConfigError, match="profile"):
        run_experiment(_cfg(profiles="1,1,1"), _small_data(), tmp_path)


# ------------------------------------------------------------------ cli


def test_cli_end_to_end(tmp_path, capsys):
    data = tmp_path / "s.csv"
    assert cli.main(["simulate", "--scenario", "scenario1", "--seed", "1", "--out", str(data)]) == 0
    assert (tmp_path / "s.truth.json").exists()
    run = tmp_path / "run"
    sets = ["--set", "conditional_iterations=20", "--set", "conditional_burn_in=5", "--set", "K=4"]
    assert cli.main(["fit", "--model", "psbp", "--data", str(data), "--out", str(run), "--iterations", "30",
                     "--burn-in", "10", "--seed", "2"] + sets) == 0
    out = tmp_path / "sum.json"
    cc = tmp_path / "cc.csv"
    assert cli.main(["summarize", "--run", str(run), "--out", str(out), "--cocluster", str(cc)]) == 0
    assert "inclusion" in json.loads(out.read_text())
    C = np.loadtxt(cc, delimiter=",")
    assert C.shape == (200, 200) and np.allclose(np.diag(C), 1)
    pred = tmp_path / "p.csv"
    assert cli.main(["predict", "--run", str(run), "--profile", "1,0", "--grid=-5:10:16", "--out", str(pred)]) == 0
    rows = pred.read_text().splitlines()
    assert rows[0] == "y,density" and len(rows) == 17
    assert cli.main(["fit", "--manifest", str(run / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "chain_0.csv").read_bytes() == (run / "chain_0.csv").read_bytes()


def test_cli_validation_exit_code(tmp_path, capsys):
    data = tmp_path / "s.csv"
    cli.main(["simulate", "--out", str(data)])
    code = cli.main(["fit", "--model", "rpms", "--data", str(data), "--out", str(tmp_path / "r"),
                     "--iterations", "5", "--burn-in", "10", "--set", "a_pi=-1"])
    assert code == 1
    err = capsys.readouterr().err
    assert "burn_in" in err and "a_pi" in err
    assert cli.main(["fit", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "r")]) == 1
    assert cli.main(["predict", "--run", str(tmp_path), "--profile", "1,0", "--grid", "bad", "--out", "x"]) == 1


def test_cli_numeric_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("y,x\n1e200,1\n-1e200,1\n3e200,0\n")
    code = cli.main(["fit", "--model", "rpms", "--data", str(p), "--out", str(tmp_path / "r"),
                     "--iterations", "20", "--burn-in", "5"])
    assert code == 2
    err = capsys.readouterr().err
    dump = err.strip().splitlines()[-1].split("state dump: ")[1]
    info = json.loads(open(dump).read())
    assert info["iteration"] >= 1 and "state" in info
