import csv
import json

import pytest

from pnn import cli
from pnn import reference_results as ref
from pnn.errors import ConfigError
from pnn.experiment import CSV_COLUMNS, config_from_dict, run_experiment

BASE = {
    "kind": "pnn",
    "models": ["tiny-deep", "tiny-wide"],
    "dataset": {"name": "synthetic", "classes": 3, "per_class": 10, "test_per_class": 5},
    "optimizer": {"batch_size": 16},
    "global_epochs": 4,
    "max_patience": 1,
    "seeds": [1, 2, 3],
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pnn_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    out = tmp / "out"
    code = cli.main(["run", "--config", str(_write(tmp, BASE)), "--out", str(out)])
    return code, out


def test_run_writes_expected_files(pnn_run):
    code, out = pnn_run
    assert code == 0
    assert sorted(p.name for p in (out / "runs").iterdir()) == \
        ["seed_1.json", "seed_2.json", "seed_3.json"]
    assert len(list((out / "curves").iterdir())) == 3
    assert (out / "aggregate.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = _rows(out / "aggregate.csv")
    assert [r["seed"] for r in rows] == ["1", "2", "3"]
    assert all(r["model"] == "PNN1" and r["wall_s"] == "" for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["errors"]["ensemble_err"]) == {"n", "mean", "trimmed_mean", "median"}
    assert "trimmed_mean=" in (out / "summary.txt").read_text()
    assert not (out / "failures.json").exists()


def test_run_records_share_config_hash(pnn_run):
    _, out = pnn_run
    records = [json.loads(p.read_text()) for p in sorted((out / "runs").iterdir())]
    hashes = {r["config_hash"] for r in records}
    assert len(hashes) == 1
    assert json.loads((out / "config.json").read_text())["config_hash"] in hashes
    for r in records:
        assert r["swap_count"] == sum(e["swapped"] for e in r["record"]["epochs"])
        assert float(r["wall_s"]) > 0


def test_rerun_is_bit_identical_including_parallel(pnn_run, tmp_path):
    _, out = pnn_run
    cfg = _write(tmp_path, BASE)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"),
                     "--workers", "3"]) == 0
    expect = (out / "aggregate.csv").read_bytes()
    assert (tmp_path / "a" / "aggregate.csv").read_bytes() == expect
    assert (tmp_path / "b" / "aggregate.csv").read_bytes() == expect


def test_seed_list_and_systematic_are_exclusive(tmp_path, capsys):
    cfg = dict(BASE, systematic={"strata": 60, "take": 5})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 1
    assert "seeds" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("patch,field", [
    ({"kind": "boosting"}, "kind"),
    ({"models": ["resnet21", "tiny"]}, "models"),
    ({"models": ["wideresnet14", "tiny-wide"]}, "models"),
    ({"optimizer": {"momentum": 1.5}}, "momentum"),
    ({"optimizer": {"lr": 0.1}}, "optimizer"),
    ({"sub_epochs": [1]}, "sub_epochs"),
    ({"dataset": {"name": "mnist"}}, "dataset.name"),
    ({"max_patience": "never"}, "max_patience"),
    ({"seeds": None}, "seeds"),
])
def test_config_errors_name_the_field(patch, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict({**BASE, **patch})
    assert info.value.field == field


def test_bad_json_is_a_usage_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["run", "--config", str(p)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1


def test_systematic_seeds_config():
    cfg = config_from_dict({**{k: v for k, v in BASE.items() if k != "seeds"},
                            "systematic": {"strata": 60, "take": 7}})
    assert cfg.seed_list() == [71582788 * i for i in range(1, 8)]


def test_mid_run_failure_writes_manifest(tmp_path):
    root = tmp_path / "cifar"
    root.mkdir()
    for i in range(1, 6):
        (root / f"data_batch_{i}.bin").write_bytes(bytes(3073))
    (root / "test_batch.bin").write_bytes(bytes(3072))  # one byte short
    cfg = {**BASE, "models": ["resnet20", "wideresnet14"],
           "dataset": {"name": "cifar10", "root": str(root)}, "seeds": [5]}
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 2
    failures = json.loads((out / "failures.json").read_text())
    assert failures[0]["seed"] == 5 and failures[0]["error"] == "DataFormatError"
    assert (out / "config.json").exists()
    assert _rows(out / "aggregate.csv") == []


def test_wall_time_column_opt_in(tmp_path):
    cfg = config_from_dict({**BASE, "seeds": [1], "global_epochs": 1, "record_wall_time": True})
    outcome = run_experiment(cfg, tmp_path)
    assert float(_rows(tmp_path / "aggregate.csv")[0]["wall_s"]) > 0
    assert outcome.results[0].config_hash == config_from_dict(
        {**BASE, "seeds": [1], "global_epochs": 1}).config_hash()


def test_baseline_and_ensemble_runs_feed_compare(tmp_path, capsys):
    ens = config_from_dict({**BASE, "kind": "ensemble"})
    base = config_from_dict({**BASE, "kind": "baseline", "models": ["tiny-deep"]})
    run_experiment(ens, tmp_path / "ens")
    run_experiment(base, tmp_path / "base")
    for r in _rows(tmp_path / "ens" / "aggregate.csv"):
        assert r["model"] == "Ensemble" and r["swap_count"] == "0"
    for r in _rows(tmp_path / "base" / "aggregate.csv"):
        assert r["cord2_err"] == "" and r["cord1_err"] == r["ensemble_err"]
    code = cli.main(["compare", str(tmp_path / "ens" / "aggregate.csv"),
                     str(tmp_path / "base" / "aggregate.csv"), "--out", str(tmp_path / "cmp")])
    assert code == 0
    report = json.loads((tmp_path / "cmp" / "compare_report.json").read_text())
    assert [r["group"] for r in report["descriptive"]] == ["Ensemble", "tiny-deep"]
    assert report["mann_whitney"][0]["x"] == "Ensemble"


# ----------------------------------------------------------------- compare

@pytest.fixture
def dual_cifar10_csv(tmp_path):
    return ref.write_table_csv("cifar10-dual", tmp_path / "dual.csv")


def test_compare_reference_dual_table(dual_cifar10_csv, tmp_path, capsys):
    code = cli.main(["compare", str(dual_cifar10_csv), "--pair", "PNN15,Ensemble",
                     "--out", str(tmp_path / "rep")])
    assert code == 0
    text = capsys.readouterr().out
    assert "U=2.00" in text and "reject H0 at alpha=0.05" in text
    report = json.loads((tmp_path / "rep" / "compare_report.json").read_text())
    u = report["mann_whitney"][0]
    assert u["statistic"] == 2.0 and u["p_value"] == pytest.approx(0.04, abs=0.005)
    assert u["reject"] is True
    assert report["kruskal_wallis"]["df"] == 3
    assert (tmp_path / "rep" / "compare_report.txt").read_text() == text


def test_compare_resnet164_pair_not_significant(tmp_path, capsys):
    p = ref.write_table_csv("cifar100-single", tmp_path / "c100.csv")
    assert cli.main(["compare", str(p), "--pair", "ResNet164,PNN10/ResNet164"]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if "Mann-Whitney" in ln][0]
    assert "do not reject" in line


def test_compare_identical_groups(tmp_path, capsys):
    p = tmp_path / "same.csv"
    with p.open("w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for model in ("A", "B"):
            for seed, v in enumerate([5.0, 5.5, 6.0, 6.5]):
                fh.write(f"{model},{seed},,,{v},0,\n")
    assert cli.main(["compare", str(p)]) == 0
    report = cli.compare(cli.read_groups([p], "ensemble_err"))
    assert report["mann_whitney"][0]["p_value"] > 0.9
    assert not report["mann_whitney"][0]["reject"]


def test_compare_excludes_small_groups(tmp_path, capsys):
    p = tmp_path / "small.csv"
    with p.open("w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for model, vals in (("A", [1, 2, 3]), ("B", [4, 5, 6]), ("C", [7])):
            for i, v in enumerate(vals):
                fh.write(f"{model},{i},,,{v},0,\n")
    assert cli.main(["compare", str(p)]) == 0
    assert "'C' has 1 observation" in capsys.readouterr().err
    with pytest.raises(cli.UsageError):
        cli.compare({"A": [1.0, 2.0], "C": [7.0]})
    assert cli.main(["compare", str(p), "--pair", "A,C"]) == 1


def test_compare_degenerate_kruskal_wallis():
    report = cli.compare({"A": [1.0, 1.0], "B": [1.0, 1.0]})
    assert "degenerate" in report["kruskal_wallis"]
    assert "degenerate" in cli.format_report(report)


def test_compare_wrong_metric(dual_cifar10_csv):
    assert cli.main(["compare", str(dual_cifar10_csv), "--metric", "top5_err"]) == 1


# ------------------------------------------------------------- small cmds

def test_param_count(capsys):
    assert cli.main(["param-count", "resnet20"]) == 0
    assert capsys.readouterr().out.strip() == "272474"
    assert cli.main(["param-count", "resnet164"]) == 0
    assert capsys.readouterr().out.strip() == "1727284"


def test_param_count_unknown_lists_specs(capsys):
    assert cli.main(["param-count", "vgg16"]) == 1
    err = capsys.readouterr().err
    for name in ("resnet20", "wideresnet14", "resnet164", "wideresnet110", "tiny-deep"):
        assert name in err


def test_seeds(capsys):
    assert cli.main(["seeds", "--strata", "60", "--take", "5"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "71582788" and len(lines) == 5
    assert cli.main(["seeds", "--take", "7"]) == 0
    assert len(capsys.readouterr().out.split()) == 7
    assert cli.main(["seeds", "--take", "0"]) == 1
    assert cli.main(["seeds", "--strata", "5", "--take", "6"]) == 1


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["seeds", "--take", "many"])
    assert info.value.code == 1
    assert cli.main(["run", "--config", "x.json", "--workers", "0"]) == 1


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "pnn", "seeds", "--take", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.split() == ["71582788", "143165576"]
