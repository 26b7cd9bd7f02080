import csv
import json

import pytest

from driftlens.cli import RunConfig, emit_plot_data, main, snapshot_files
from driftlens.errors import ConfigError
from driftlens.measures import ChangeTable
from driftlens.regression import RegressionResult


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--decades", "3", "--drift", "20", "--seed", "7", "--out-dir", str(out)]) == 0
    return out


def snaps(d):
    return [str(p) for p in snapshot_files(d)]


def test_synth_outputs(synth_dir):
    assert [p.split("/")[-1] for p in snaps(synth_dir)] == ["1850.tsv", "1860.tsv", "1870.tsv"]
    assert (synth_dir / "1850.freq.tsv").is_file()
    rows = list(csv.DictReader(open(synth_dir / "truth.tsv"), delimiter="\t"))
    assert set(rows[0]) == {"word", "type", "magnitude", "decade"}
    assert sum(r["type"] == "drift" for r in rows) == 20


def test_run_pipeline_and_determinism(synth_dir, tmp_path):
    args = ["run", "--snapshots", *snaps(synth_dir), "--pos", str(synth_dir / "pos.tsv")]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("changes.tsv", "fit_global.json", "fit_local.json", "contrast.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config_sha256"] and man["version"] and man["timestamp"]
    assert len(man["inputs"]) >= 4 and set(man["outputs"]) >= {"changes", "fit_local"}
    table = ChangeTable.from_tsv(tmp_path / "a" / "changes.tsv")
    assert table.standardized and len(table) > 0


def test_contrast_csv_equals_fits(synth_dir, tmp_path):
    out = tmp_path / "r"
    main(["run", "--snapshots", str(synth_dir), "--pos", str(synth_dir / "pos.tsv"), "--out-dir", str(out)])
    rows = list(csv.reader(open(out / "contrast.csv")))
    assert rows[0] == ["label", "value", "ci_low", "ci_high"] and len(rows) == 3
    fit = RegressionResult.from_json(out / "fit_local.json")
    assert float(rows[2][1]) == fit["is_noun"]
    assert float(rows[2][3]) - float(rows[2][1]) == pytest.approx(1.96 * fit.stderr("is_noun"), rel=1e-12)


def test_dry_run_writes_nothing(synth_dir, tmp_path, capsys):
    out = tmp_path / "dry"
    assert main(["run", "--snapshots", *snaps(synth_dir), "--pos", str(synth_dir / "pos.tsv"),
                 "--out-dir", str(out), "--dry-run"]) == 0
    assert not out.exists()
    assert "align" in capsys.readouterr().out


def test_missing_pos_is_config_error(synth_dir, tmp_path, capsys):
    out = tmp_path / "nopos"
    assert main(["run", "--snapshots", *snaps(synth_dir), "--out-dir", str(out)]) == 2
    assert "error [config]" in capsys.readouterr().err
    assert not out.exists()


def test_config_file_and_override(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"snapshots": snaps(synth_dir), "pos": str(synth_dir / "pos.tsv"),
                               "out_dir": "out", "k": 10, "measures": ["local"]}))
    assert main(["run", "--config", str(cfg), "--k", "12", "--method", "ols"]) == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["config"]["k"] == 12 and man["config"]["method"] == "ols"
    assert (tmp_path / "out" / "fit_local.json").is_file()
    assert not (tmp_path / "out" / "fit_global.json").exists()


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"snapshots": [], "bogus": 1}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"kk": 1})


def test_subcommands(synth_dir, tmp_path, capsys):
    aligned = tmp_path / "aligned"
    assert main(["align", "--in", *snaps(synth_dir), "--out-dir", str(aligned)]) == 0
    assert json.loads((aligned / "alignment.json").read_text())["anchor"] == "1870"

    assert main(["neighbors", "--snapshot", str(aligned / "1870.tsv"), "--word", "w0001", "--k", "5",
                 "--out", str(tmp_path / "nb.tsv")]) == 0
    lines = (tmp_path / "nb.tsv").read_text().splitlines()
    assert lines[0] == "rank\tword\tsimilarity" and len(lines) == 6

    changes = tmp_path / "changes.tsv"
    assert main(["change", "--aligned-dir", str(aligned), "--k", "25", "--out", str(changes)]) == 0
    assert main(["regress", "--changes", str(changes), "--pos", str(synth_dir / "pos.tsv"),
                 "--measure", "global", "--out", str(tmp_path / "fit.json")]) == 0
    assert RegressionResult.from_json(tmp_path / "fit.json").measure == "global"

    words = "w0001,w0002,w0003,w0004,w0005,w0006"
    assert main(["casestudy", "--aligned-dir", str(aligned), "--words", words, "--start", "1850",
                 "--end", "1870", "--plot-data", str(tmp_path / "case.csv")]) == 0
    rows = list(csv.reader(open(tmp_path / "case.csv")))
    assert len(rows) == 7
    printed = [l.split("\t") for l in capsys.readouterr().out.splitlines() if l.startswith("w000")]
    assert [r[0] for r in rows[1:]] == [p[0] for p in printed]
    assert all(float(r[1]) == float(p[5]) for r, p in zip(rows[1:], printed))


def test_stage_tagged_errors(synth_dir, capsys):
    assert main(["neighbors", "--snapshot", str(synth_dir / "1850.tsv"), "--word", "nope"]) == 1
    assert "error [neighbors]" in capsys.readouterr().err


def test_train(tmp_path):
    corpus = tmp_path / "c_1900.txt"
    corpus.write_text("the cat sat\nthe dog sat\na cat ran\n" * 4)
    assert main(["train", "--corpus", str(corpus), "--window", "2", "--dim", "3",
                 "--out", str(tmp_path / "s.tsv")]) == 0
    assert len((tmp_path / "s.tsv").read_text().splitlines()) == 6


def test_emit_plot_data_missing_artifact(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plot_data("pos_contrast", (str(tmp_path / "a.json"), str(tmp_path / "b.json")), tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_plot_data("pie", None, tmp_path / "x.csv")


def test_threads_flag_validated(capsys):
    assert main(["change", "--aligned-dir", ".", "--out", "x", "--threads", "0"]) == 2
