import json

import pytest

from trimodal import archive
from trimodal.cli import main
from trimodal.dataprep import DatasetArchive

from conftest import TETRA_OFF

TINY_TRAIN = {"batch_size": 4, "iterations": 4, "base_lr": 0.01, "knn": 4, "checkpoint_every": 2, "decay_every": 500}


def write_config(path, **train):
    path.write_text(json.dumps({"train": {**TINY_TRAIN, **train}, "seed": 0}))
    return path


@pytest.fixture(scope="module")
def trained(tiny_archive, tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.json")
    assert main(["train", "--data", str(tiny_archive), "--config", str(cfg), "--out", str(root / "run")]) == 0
    return root / "run"


def read_json_output(capsys):
    out = capsys.readouterr().out
    return json.loads(out[out.index("{"):])


def test_prep_happy_path_and_views_flag(tmp_path, capsys):
    (tmp_path / "t.off").write_text(TETRA_OFF)
    archive.write_jsonl(tmp_path / "m.jsonl", [{"id": "t", "path": "t.off", "label": 0},
                                               {"id": "c", "generator": {"family": "cone", "seed": 0}, "label": 1}])
    code = main(["prep", "--manifest", str(tmp_path / "m.jsonl"), "--out", str(tmp_path / "data"),
                 "--views", "4", "--points", "32", "--faces", "16", "--resolution", "16"])
    assert code == 0
    summary = read_json_output(capsys)
    assert summary["objects"] == 2 and summary["failures"] == 0 and summary["bytes"] > 0
    ds = DatasetArchive(tmp_path / "data")
    assert ds.num_views("t") == 4 and ds.tensor("c", "points").shape == (32, 3)


def test_prep_missing_manifest(tmp_path, capsys):
    assert main(["prep", "--manifest", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "d")]) == 2
    assert "not found" in capsys.readouterr().err


def test_prep_all_failures_exit_1(tmp_path):
    archive.write_jsonl(tmp_path / "m.jsonl", [{"id": "x", "path": "missing.off"}])
    assert main(["prep", "--manifest", str(tmp_path / "m.jsonl"), "--out", str(tmp_path / "d")]) == 1


def test_make_toy(tmp_path):
    assert main(["make-toy", "--out", str(tmp_path / "toy.jsonl")]) == 0
    rows = archive.read_jsonl(tmp_path / "toy.jsonl")
    assert len(rows) == 90
    assert sum(r["split"] == "train" for r in rows) == 60


def test_train_artifacts(trained):
    assert (trained / "checkpoints" / "iter_0000004" / "meta.json").exists()
    rows = archive.read_jsonl(trained / "metrics.jsonl")
    assert [r["iter"] for r in rows] == [1, 2, 3, 4]
    echoed = json.loads((trained / "experiment_config.json").read_text())
    assert echoed["train"]["iterations"] == 4 and echoed["train"]["knn"] == 4


def test_train_resume(tiny_archive, tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    run = tmp_path / "run"
    assert main(["train", "--data", str(tiny_archive), "--config", str(cfg), "--out", str(run)]) == 0
    first = archive.read_jsonl(run / "metrics.jsonl")
    (run / "checkpoints" / "LATEST").write_text("iter_0000002")
    assert main(["train", "--data", str(tiny_archive), "--config", str(cfg), "--out", str(run), "--resume"]) == 0
    second = archive.read_jsonl(run / "metrics.jsonl")
    assert [r["iter"] for r in second] == [1, 2, 3, 4]
    assert [r["total"] for r in second] == pytest.approx([r["total"] for r in first], rel=1e-6)


def test_paper_scale_echo(tiny_archive, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    code = main(["train", "--data", str(tiny_archive), "--config", str(cfg), "--paper-scale", "--dry-run"])
    assert code == 0
    resolved = read_json_output(capsys)["resolved_config"]["train"]
    assert resolved["batch_size"] == 96 and resolved["iterations"] == 160_000
    assert resolved["base_lr"] == 0.001 and resolved["decay_every"] == 40_000


def test_bad_config_is_usage_error(tiny_archive, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"batch_size": "eight"}}))
    assert main(["train", "--data", str(tiny_archive), "--config", str(bad), "--dry-run"]) == 2
    bad.write_text(json.dumps({"trian": {}}))
    assert main(["train", "--data", str(tiny_archive), "--config", str(bad), "--dry-run"]) == 2


def test_output_root_env(tiny_archive, tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"train": TINY_TRAIN, "output_dir": "runs/x"}))
    monkeypatch.setenv("TRIMODAL_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["train", "--data", str(tiny_archive), "--config", str(cfg), "--dry-run"]) == 0
    assert read_json_output(capsys)["resolved_config"]["output_dir"] == str(tmp_path / "root" / "runs" / "x")


def ckpt(trained):
    return str(trained / "checkpoints" / "iter_0000004")


def test_eval_probe_schema_and_idempotence(trained, tiny_archive, tmp_path):
    args = ["eval", "--task", "probe", "--modality", "point", "--checkpoint", ckpt(trained), "--data", str(tiny_archive)]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert 0 <= a["metrics"]["accuracy"] <= 1
    assert {"task", "config_hash", "metrics", "seed", "timestamp"} <= set(a)
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b


def test_eval_retrieval_and_report(trained, tiny_archive, tmp_path):
    out = tmp_path / "r.json"
    args = ["eval", "--task", "retrieval", "--source", "image", "--target", "mesh", "--views", "4",
            "--checkpoint", ckpt(trained), "--data", str(tiny_archive), "--out", str(out)]
    assert main(args) == 0
    res = json.loads(out.read_text())
    assert 0 < res["metrics"]["mAP"] <= 1 and res["metrics"]["views"] == 4
    assert len(res["metrics"]["rankings"]) == 3
    html_path = tmp_path / "report.html"
    assert main(["report", "--from", str(out), "--out", str(html_path)]) == 0
    html = html_path.read_text()
    assert html.count("class='ranking'") == 3
    # the gallery holds only 3 test objects here, so each row shows all of them
    assert html.count("class='gallery ") == 9
    assert html.count("class='query'") == 3


def test_eval_fewshot(trained, tiny_archive, capsys):
    code = main(["eval", "--task", "fewshot", "--modality", "mesh", "--shots", "1", "2", "--rounds", "2",
                 "--checkpoint", ckpt(trained), "--data", str(tiny_archive)])
    assert code == 0
    shots = read_json_output(capsys)["metrics"]["shots"]
    assert set(shots) == {"1", "2"} and len(shots["1"]["rounds"]) == 2


def test_eval_usage_errors(trained, tiny_archive):
    base = ["--checkpoint", ckpt(trained), "--data", str(tiny_archive)]
    with pytest.raises(SystemExit) as err:
        main(["eval", "--task", "cluster"] + base)
    assert err.value.code == 2
    assert main(["eval", "--task", "retrieval", "--source", "image"] + base) == 2
    assert main(["eval", "--task", "fewshot", "--shots", "50"] + base) == 1


def test_report_missing_input(tmp_path):
    assert main(["report", "--from", str(tmp_path / "none.json"), "--out", str(tmp_path / "r.html")]) == 2
