import csv
import json

import pytest

from ngc.cli import main


def write_config(tmp_path, **sections):
    cfg = {"seed": 0, "synthetic": {"samples_per_class": 30, "num_ood": 20, "sym_noise_level": 0.3,
                                    "test_samples_per_class": 10, "test_num_ood": 20}}
    cfg["train"] = {"epochs": 3, "warmup_epochs": 2}
    for key, value in sections.items():
        cfg.setdefault(key, {}).update(value) if isinstance(value, dict) else cfg.__setitem__(key, value)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def trained(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["generate", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg)]) == 0
    return tmp_path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_generate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("train.csv", "test.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_field_is_named(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"graph": {"k": 3}}))
    assert main(["generate", "--config", str(path)]) == 1
    assert "seed" in capsys.readouterr().err
    path.write_text(json.dumps({"seed": 0, "graph": {"kay": 3}}))
    assert main(["train", "--config", str(path)]) == 1
    assert "graph.kay" in capsys.readouterr().err


def test_train_artifacts(trained):
    run = trained / "run"
    for name in ("model.bin", "prototypes.bin", "selection.csv", "epoch_log.jsonl", "config.json", "train_summary.json"):
        assert (run / name).exists(), name
    assert len((run / "epoch_log.jsonl").read_text().splitlines()) == 3
    assert read_rows(run / "selection.csv")[0] == ["id", "g", "pseudo_label", "in_lcc"]


def test_zero_epochs_then_detect_reports_missing_prototypes(tmp_path, capsys):
    cfg = write_config(tmp_path, train={"epochs": 0})
    assert main(["generate", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg)]) == 0
    assert (tmp_path / "run" / "model.bin").exists()
    assert not (tmp_path / "run" / "prototypes.bin").exists()
    assert (tmp_path / "run" / "epoch_log.jsonl").read_text() == ""
    assert main(["detect", "--config", str(cfg)]) == 2
    assert "prototypes" in capsys.readouterr().err


def test_train_missing_csv_is_runtime_error(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["train", "--config", str(cfg)]) == 2


def test_train_is_reproducible(trained, tmp_path):
    cfg = trained / "config.json"
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for name in ("model.bin", "epoch_log.jsonl", "selection.csv", "prototypes.bin"):
        assert (trained / "run" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_detect_outputs(trained):
    run = trained / "run"
    assert main(["detect", "--model", str(run), "--test", str(trained / "test.csv"), "--zeta", "-1",
                 "--out", str(trained / "d.csv")]) == 0
    rows = read_rows(trained / "d.csv")
    assert rows[0] == ["id", "score", "verdict", "predicted_class"]
    assert len(rows) == 61 and all(r[2] == "IND" for r in rows[1:])
    assert main(["detect", "--model", str(run), "--test", str(trained / "test.csv"), "--zeta", "-1",
                 "--out", str(trained / "d2.csv")]) == 0
    assert (trained / "d.csv").read_bytes() == (trained / "d2.csv").read_bytes()
    assert main(["detect", "--model", str(run), "--test", str(trained / "test.csv"), "--zeta", "3"]) == 1


def test_detect_empty_test_file(trained, caplog):
    empty = trained / "empty.csv"
    empty.write_text("# num_classes=4 split=test\nid,given_label,true_label," + ",".join(
        f"feat_{j}" for j in range(16)) + "\n")
    with caplog.at_level("WARNING"):
        assert main(["detect", "--model", str(trained / "run"), "--test", str(empty), "--out",
                     str(trained / "e.csv")]) == 0
    assert read_rows(trained / "e.csv") == [["id", "score", "verdict", "predicted_class"]]
    assert "no test rows" in caplog.text


def _eval(args, out):
    assert main(["eval", *args, "--out", str(out)]) == 0
    return json.loads(out.read_text())


def test_eval_perfect_classifier(tmp_path):
    truth = tmp_path / "t.csv"
    truth.write_text("# num_classes=2 split=test\nid,given_label,true_label,feat_0\n"
                     "0,0,0,1.0\n1,1,1,1.0\n2,0,-1,1.0\n")
    det = tmp_path / "d.csv"
    det.write_text("id,score,verdict,predicted_class\n0,0.9,IND,0\n1,0.8,IND,1\n2,0.1,OOD,1\n")
    report = _eval(["--detections", str(det), "--truth", str(truth)], tmp_path / "r.json")
    assert report["accuracy"] == report["auroc"] == report["f_measure"] == 1.0
    assert report["zeta"] is None
    # recomputing verdicts at a threshold above every score rejects everything
    report = _eval(["--detections", str(det), "--truth", str(truth), "--zeta", "0.95"], tmp_path / "r.json")
    assert report["f_measure"] == 0.0 and report["zeta"] == 0.95


def test_eval_row_order_and_ids(trained, tmp_path):
    run = trained / "run"
    assert main(["detect", "--config", str(trained / "config.json")]) == 0
    det = run / "detections.csv"
    rows = read_rows(det)
    shuffled = tmp_path / "shuffled.csv"
    with open(shuffled, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows([rows[0]] + rows[1:][::-1])
    args = ["--truth", str(trained / "test.csv"), "--sweep-zeta", "--model", str(run)]
    a = _eval(["--detections", str(det), *args], tmp_path / "a.json")
    b = _eval(["--detections", str(shuffled), *args], tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert len(a["sweep"]) == 201 and a["best_f_measure"] >= a["f_measure"]
    assert a["selected_count"] is not None
    sweep_rows = read_rows(tmp_path / "a.sweep.csv")
    assert sweep_rows[0] == ["zeta", "f_measure"] and len(sweep_rows) == 202
    assert b == a

    disjoint = tmp_path / "disjoint.csv"
    with open(disjoint, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows([rows[0]] + [[str(int(r[0]) + 1000), *r[1:]] for r in rows[1:]])
    assert main(["eval", "--detections", str(disjoint), "--truth", str(trained / "test.csv")]) == 1
    partial = tmp_path / "partial.csv"
    with open(partial, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows[:-1])
    assert main(["eval", "--detections", str(partial), "--truth", str(trained / "test.csv")]) == 1


def test_eval_stdout(tmp_path, capsys):
    truth = tmp_path / "t.csv"
    truth.write_text("# num_classes=2 split=test\nid,given_label,true_label,feat_0\n0,0,0,1.0\n")
    det = tmp_path / "d.csv"
    det.write_text("id,score,verdict,predicted_class\n0,0.9,IND,0\n")
    assert main(["eval", "--detections", str(det), "--truth", str(truth)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["auroc"] is None and report["accuracy"] == 1.0


def test_python_dash_m_entry_point(tmp_path):
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "ngc", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "generate" in out.stdout
