import json

import pytest

from topkfs.cli import main
from topkfs.config import ExperimentConfig
from topkfs.data import make_sparse_regression, write_csv
from topkfs.errors import ConfigError

SMALL = ["--set", "data.n=60", "--set", "data.m=12", "--set", "data.n_informative=3", "--set", "selection.k=3"]


def run(tmp_path, *args):
    code = main([*args, "--out", str(tmp_path)])
    dirs = sorted(p for p in tmp_path.iterdir() if p.is_dir()) if tmp_path.exists() else []
    return code, dirs


def records(d):
    return [json.loads(line) for line in (d / "results.jsonl").read_text().splitlines()]


def test_simulate_writes_one_record(tmp_path):
    code, [d] = run(tmp_path, "simulate")
    assert code == 0
    assert d.name.startswith("simulate-")
    assert {p.name for p in d.iterdir()} == {"results.jsonl", "summary.txt"}
    [rec] = records(d)
    assert rec["config_fingerprint"].startswith(d.name.split("-")[1])
    assert "wall_seconds" not in rec and "f1_selection" in rec["metrics"]


def test_sweep_k_default_grid(tmp_path):
    code, [d] = run(tmp_path, "sweep-k", "--set", "sweep.k_values=10:50:10")
    assert code == 0
    recs = records(d)
    assert [r["k"] for r in recs] == [10, 20, 30, 40, 50]
    assert len({r["config_fingerprint"] for r in recs}) == 1
    assert (d / "curves.csv").read_text().splitlines()[0].startswith("k,")


@pytest.mark.parametrize("args", [
    ["select", *SMALL],
    ["sweep-k", *SMALL, "--set", "sweep.k_values=2,3"],
    ["stability", *SMALL, "--set", "stability.n_splits=3", "--set", "experiment.workers=2"],
    ["select", *SMALL, "--set", "experiment.model_kind=mlp_reg", "--set", "mlp.epochs=20"],
    ["gradcheck"],
    ["approx-study", "--set", "approx.target=linear", "--set", "approx.support=3", "--set", "approx.m=5",
     "--set", "approx.widths=4", "--set", "approx.seeds=0", "--set", "approx.n_train=50",
     "--set", "approx.epochs=20", "--set", "approx.polish_epochs=20"],
])
def test_byte_identical_reruns(tmp_path, args):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    [da], [db] = list(a.iterdir()), list(b.iterdir())
    assert da.name == db.name
    for f in da.iterdir():
        assert f.read_bytes() == (db / f.name).read_bytes()
    fp = {r["config_fingerprint"] for r in records(da)}
    assert len(fp) == 1


def test_stability_reports_both_variants(tmp_path):
    code, [d] = run(tmp_path, "stability", *SMALL, "--set", "stability.n_splits=3")
    assert code == 0
    summary = [r for r in records(d) if "mean_jaccard" in r]
    assert [r["topk"] for r in summary] == [True, False]
    assert len(records(d)) == 2 * 3 + 2


def test_existing_output_needs_overwrite(tmp_path, capsys):
    assert run(tmp_path, "select", *SMALL)[0] == 0
    assert run(tmp_path, "select", *SMALL)[0] == 1
    assert "--overwrite" in capsys.readouterr().err
    assert run(tmp_path, "select", *SMALL, "--overwrite")[0] == 0


def test_seed_changes_output_path(tmp_path):
    run(tmp_path, "select", *SMALL)
    _, dirs = run(tmp_path, "select", *SMALL, "--seed", "1")
    assert len(dirs) == 2


def test_unknown_keys_are_listed(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[linear]\nlambda_l1 = 2\nlamda_l2 = 1\n[plots]\nx = 1\n")
    assert main(["select", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "linear.lamda_l2" in err and "[plots]" in err


@pytest.mark.parametrize("override", ["selection.k=zero", "experiment.model_kind=svm", "data.source=csv",
                                      "selection.k=0", "nodot=1"])
def test_config_errors_exit_1(tmp_path, override):
    assert run(tmp_path, "select", "--set", override)[0] == 1


def test_numerical_failure_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "select", *SMALL, "--set", "linear.step=1e6", "--set", "linear.backtracking=false",
                  "--set", "linear.max_iters=5000")
    assert code == 2
    assert "numerical" in capsys.readouterr().err


def test_gradcheck_tolerance_failure_exit_2(tmp_path):
    assert run(tmp_path, "gradcheck")[0] == 0
    assert run(tmp_path / "strict", "gradcheck", "--set", "gradcheck.tol_mlp=1e-30")[0] == 2


def test_csv_source(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(make_sparse_regression(40, 6, 2, seed=0), path)
    code, [d] = run(tmp_path / "out", "select", "--set", "data.source=csv", "--set", f"data.path={path}",
                    "--set", "data.target=target", "--set", "selection.k=2")
    assert code == 0 and records(d)[0]["k"] == 2
    assert run(tmp_path / "out2", "select", "--set", "data.source=csv", "--set", "data.path=/nope.csv")[0] == 1


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TOPKFS_OUTPUT_DIR", str(tmp_path))
    assert main(["gradcheck"]) == 0
    assert any(p.name.startswith("gradcheck-") for p in tmp_path.iterdir())


def test_print_defaults_round_trip(capsys):
    assert main(["--print-defaults"]) == 0
    text = capsys.readouterr().out
    assert "[mlp]" in text and "k_values = 10, 20, 30, 40, 50" in text
    parsed = ExperimentConfig.from_text(text)
    assert parsed.fingerprint() == ExperimentConfig.defaults().fingerprint()
    assert parsed.to_text() == text


def test_config_round_trip_with_overrides():
    cfg = ExperimentConfig.from_text("[mlp]\nrate = 0.003\nhidden = 16\n", ["selection.k=7", "linear.step=auto"])
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again.fingerprint() == cfg.fingerprint()
    assert again["mlp"]["hidden"] == (16,) and again["selection"]["k"] == 7
    assert cfg.select_config().mlp.h.k == 7


def test_malformed_config():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("no section header\n")
