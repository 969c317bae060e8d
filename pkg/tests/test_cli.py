import json

import pytest

from botamp.cli import main
from botamp.pipeline import derive_seed

from conftest import write_jsonl, write_scores_csv


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n", "2000", "--seed", "42", "--signal", "1", "--out", str(d)]) == 0
    return d


def test_synth_then_report(synth_dir, tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["report", "--in", str(synth_dir), "--out", str(out)]) == 0
    for name in ("report.json", "roc_lr.csv", "roc_knn.csv", "roc_svm.csv", "groups.csv", "ztest.json"):
        assert (out / name).exists()
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["models"]) == {"lr", "knn", "svm"}
    assert rep["config"]["k"] == 34 and rep["config"]["threshold"] == 20.0
    assert rep["config"]["train_fraction"] == 0.7
    assert rep["counts"]["total"] == 2000
    assert set(rep["counts"]["by_partition"]) == {"all", "health", "other"}
    assert len(rep["correlation"]["matrix"]) == 7
    assert rep["software"]["version"]
    assert (out / "roc_lr.csv").read_text().startswith("fpr,tpr\n")
    assert b"\r\n" not in (out / "groups.csv").read_bytes()


def test_resample_before_split_test_set_not_smaller(synth_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--in", str(synth_dir), "--models", "lr", "--bootstrap-rounds", "1", "--lr-epochs", "20"]
    assert main(["report", *common, "--out", str(a)]) == 0
    assert main(["report", *common, "--resample-before-split", "--out", str(b)]) == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    assert rb["counts"]["test_rows"] >= ra["counts"]["test_rows"]


def test_label_threshold_40(synth_dir, tmp_path, capsys):
    assert main(["label", "--in", str(synth_dir), "--threshold", "40", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "labeled.csv").read_text().splitlines()
    assert len(lines) == 2001
    assert not any(line.endswith(",true") for line in lines)
    assert json.loads((tmp_path / "label_summary.json").read_text())["spammed"] == 0


def test_score_and_summarize(synth_dir, tmp_path):
    assert main(["score", "--in", str(synth_dir), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "score_summary.json").read_text())
    assert summary["summary"]["q3"] < 16
    assert main(["label", "--in", str(synth_dir), "--out", str(tmp_path)]) == 0
    assert main(["summarize", "--labeled", str(tmp_path / "labeled.csv"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "groups.csv").read_text().startswith("grouping,key,n,n_spammed,ratio,median_score\n")
    assert (tmp_path / "correlation.csv").exists()


def test_train_then_eval(synth_dir, tmp_path):
    args = ["--in", str(synth_dir), "--out", str(tmp_path), "--models", "lr,svm", "--lr-epochs", "50"]
    assert main(["train", *args]) == 0
    assert (tmp_path / "model_lr.json").exists() and (tmp_path / "vocab.json").exists()
    assert main(["eval", *args]) == 0
    res = json.loads((tmp_path / "eval.json").read_text())
    assert set(res) == {"lr", "svm"}
    # a different seed changes the split, so the saved encodings no longer match
    assert main(["eval", *args, "--seed", "7"]) == 3


def test_eval_without_models_is_config_error(synth_dir, tmp_path):
    assert main(["eval", "--in", str(synth_dir), "--out", str(tmp_path), "--models", "knn"]) == 2


def test_ztest_published_counts_from_labeled_file(tmp_path):
    header = "altmetric_id,overall_score,discipline,journal,research_type,publisher,altmetric_score," \
             "author_location,is_spammed\n"

    def block(prefix, disc, x, n):
        spam = f",25.0,{disc},J,article,P,1.0,unknown,true\n"
        calm = f",5.0,{disc},J,article,P,1.0,unknown,false\n"
        return "".join(f"{prefix}{i}{spam if i < x else calm}" for i in range(n))

    path = tmp_path / "labeled.csv"
    path.write_text(header + block("h", "Medicine", 174_876, 1_178_085) + block("o", "Energy", 26_803, 219_922))
    assert main(["ztest", "--labeled", str(path), "--out", str(tmp_path)]) == 0
    z = json.loads((tmp_path / "ztest.json").read_text())
    assert z["z"] == pytest.approx(32.5, abs=0.1)
    assert z["underflow"] is True and z["p_two_tailed"] < 0.001


def test_ztest_counts(tmp_path):
    assert main(["ztest", "--counts", "30,100,20,100", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "ztest.json").read_text())["z"] == pytest.approx(1.6330, abs=1e-4)
    assert main(["ztest", "--counts", "1,2,3", "--out", str(tmp_path)]) == 2
    assert main(["ztest", "--counts", "0,10,0,10", "--out", str(tmp_path)]) == 3


def test_config_file_precedence(synth_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# flat settings\nthreshold = 40\nlr-epochs = 5\nmodels = lr\n", encoding="utf-8")
    assert main(["label", "--config", str(cfg), "--in", str(synth_dir), "--out", str(tmp_path)]) == 2
    cfg.write_text("threshold = 40\n", encoding="utf-8")
    assert main(["label", "--config", str(cfg), "--in", str(synth_dir), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "label_summary.json").read_text())["spammed"] == 0
    assert main(["label", "--config", str(cfg), "--threshold", "0", "--in", str(synth_dir),
                 "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "label_summary.json").read_text())["threshold"] == 0.0


@pytest.mark.parametrize("argv", [
    ["report", "--in", "nowhere", "--out", "x"],
    ["report", "--labeled", "missing.csv", "--out", "x"],
    ["report", "--train-fraction", "1.5"],
    ["label", "--threshold", "41"],
    ["synth", "--n", "3"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("k = many\n", encoding="utf-8")
    assert main(["report", "--config", str(cfg)]) == 2


def test_argparse_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["report", "--k", "x"])
    assert exc.value.code == 2


def test_data_error_exit_3(tmp_path, article):
    write_jsonl(tmp_path / "articles.jsonl", [article, article])
    write_scores_csv(tmp_path / "scores.csv", [["u1"] + [1] * 8])
    assert main(["label", "--in", str(tmp_path), "--out", str(tmp_path / "o")]) == 3


def test_numeric_error_exit_4(monkeypatch, tmp_path):
    from botamp import cli
    from botamp.errors import NumericError

    def boom(v):
        raise NumericError("loss became nan")
    monkeypatch.setitem(cli.HANDLERS, "report", boom)
    assert main(["report"]) == 4


def test_harvest_simulated(tmp_path):
    source = write_scores_csv(tmp_path / "source.csv", [[f"u{i}"] + [i % 5] * 8 for i in range(30)])
    users = tmp_path / "users.txt"
    users.write_text("\n".join(f"u{i}" for i in range(30)) + "\nghost\n")
    out = tmp_path / "h"
    argv = ["harvest", "--users", str(users), "--source", str(source), "--simulated-clock", "--out", str(out)]
    assert main(argv) == 0
    lines = (out / "scores.csv").read_text().splitlines()
    assert len(lines) == 31
    assert main(argv) == 0  # resumes from the checkpoint without re-fetching
    assert (out / "scores.csv").read_text().splitlines() == lines


def test_stage_seeds_independent():
    assert derive_seed(42, "split") != derive_seed(42, "upsample")
    assert derive_seed(42, "split") == derive_seed(42, "split")
    assert derive_seed(42, "split") != derive_seed(43, "split")


def test_help_mentions_precedence(capsys):
    with pytest.raises(SystemExit):
        main(["report", "--help"])
    assert "override" in capsys.readouterr().out
