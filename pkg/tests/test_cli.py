import json
import subprocess
import sys

import pytest

from scenemrf import io
from scenemrf.cli import main
from scenemrf.synthgen import stacked_spec

from helpers import horizontal_patch, make_scene, vertical_patch


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def metrics(text):
    line = next(l for l in text.splitlines() if l.startswith("mean ") or l.startswith("summary "))
    return {k: float(v) for k, v in (t.split("=") for t in line.split()[1:] if "=" in t)
            if k.startswith(("micro", "macro"))}


@pytest.fixture(scope="module")
def stacked_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("stacked")
    io.write_json(d / "spec.json", stacked_spec().to_dict())
    assert main(["gen", "--spec", str(d / "spec.json"), "--n", "8", "--seed", "7",
                 "--out", str(d / "scenes")]) == 0
    return d


def test_gen_is_deterministic(stacked_dir, tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "--spec", stacked_dir / "spec.json", "--n", 8, "--seed", 7,
                     "--out", tmp_path)
    assert code == 0
    for p in sorted((stacked_dir / "scenes").iterdir()):
        assert (tmp_path / p.name).read_bytes() == p.read_bytes()


def test_train_folds_deterministic(stacked_dir, capsys):
    args = ("train", stacked_dir / "scenes", "--folds", 4, "--scheme", "nonassoc",
            "--context-range", 0.4, "--C", 1.0, "--seed", 7)
    code, a, err = run(capsys, *args)
    assert code == 0 and "wall_time=" in err
    _, b, _ = run(capsys, *args)
    assert a == b
    assert len([l for l in a.splitlines() if l.startswith("fold=")]) == 4
    assert metrics(a)["micro_precision"] > 0.5


def test_train_predict_eval_chain(stacked_dir, tmp_path, capsys):
    model = tmp_path / "model.json"
    code, out, _ = run(capsys, "train", stacked_dir / "scenes", "--scheme", "nonassoc",
                       "--context-range", 0.4, "--C", 1.0, "--out", model)
    assert code == 0 and "converged=True" in out
    first = model.read_bytes()
    run(capsys, "train", stacked_dir / "scenes", "--scheme", "nonassoc", "--context-range", 0.4,
        "--C", 1.0, "--out", model)
    assert model.read_bytes() == first
    code, out, _ = run(capsys, "predict", stacked_dir / "scenes", "--model", model,
                       "--out", tmp_path / "pred")
    assert code == 0 and out.count("scene=") == 8
    doc = json.loads((tmp_path / "pred" / "scene_000.json").read_text())
    assert "labels" in doc and "predicted_labels" in doc
    code, out, _ = run(capsys, "eval", tmp_path / "pred")
    assert code == 0 and "micro P/R" in out
    assert set(metrics(out)) == {"micro_precision", "micro_recall", "macro_precision", "macro_recall"}


def test_eval_pred_equals_truth(stacked_dir, tmp_path, capsys):
    for p in sorted((stacked_dir / "scenes").glob("scene_*.json")):
        d = json.loads(p.read_text())
        d["predicted_labels"] = d["labels"]
        io.write_json(tmp_path / p.name, d)
    code, out, _ = run(capsys, "eval", tmp_path,
                       "--label-space", stacked_dir / "scenes" / "label_space.json")
    assert code == 0
    assert metrics(out) == {"micro_precision": 1.0, "micro_recall": 1.0,
                            "macro_precision": 1.0, "macro_recall": 1.0}


def test_graphcut_on_frustrated_marks_unlabeled(tmp_path, capsys):
    assert run(capsys, "gen", "--preset", "frustrated", "--n", 8, "--seed", 5,
               "--out", tmp_path / "f")[0] == 0
    assert run(capsys, "train", tmp_path / "f", "--scheme", "nonassoc", "--context-range", 0.4,
               "--C", 1.0, "--eps", 0.05, "--out", tmp_path / "m.json")[0] == 0
    code, out, _ = run(capsys, "predict", tmp_path / "f", "--model", tmp_path / "m.json",
                       "--inference", "graphcut", "--out", tmp_path / "p")
    assert code == 0
    labels = [json.loads(p.read_text())["predicted_labels"]
              for p in (tmp_path / "p").glob("scene_*.json")]
    assert any(v == [io.UNLABELED] for d in labels for v in d.values())
    _, out, _ = run(capsys, "eval", tmp_path / "p")
    m = metrics(out)
    assert m["micro_precision"] > m["micro_recall"]


def test_sweep_writes_table(stacked_dir, tmp_path, capsys):
    scenes = sorted((stacked_dir / "scenes").glob("scene_00[0-3].json"))
    code, out, _ = run(capsys, "sweep", *scenes, "--scheme", "node", "--ranges", "0.05,0.4",
                       "--folds", 2, "--label-space", stacked_dir / "scenes" / "label_space.json",
                       "--out", tmp_path / "sweep.tsv")
    assert code == 0
    rows = (tmp_path / "sweep.tsv").read_text().splitlines()
    assert rows[0].startswith("range\t") and len(rows) == 3


def test_segment_and_featurize(tmp_path, capsys):
    scene = make_scene([horizontal_patch((0, 0, 0.7), (0.6, 0.6), 0.02),
                        vertical_patch((0, 0.5, 0.9), (0.6, 0.4), 0.02)])
    raw = io.scene_to_dict(io.SceneDocument(scene))
    raw.pop("segments")
    io.write_json(tmp_path / "raw.json", raw)
    code, out, _ = run(capsys, "segment", tmp_path / "raw.json", tmp_path / "seg.json")
    assert code == 0 and "segments=2" in out
    code, out, _ = run(capsys, "featurize", tmp_path / "seg.json", tmp_path / "feat.json")
    assert code == 0
    feats = json.loads((tmp_path / "feat.json").read_text())
    assert len(feats["node_features"]) == 2 and feats["context_range"] == 0.3


def test_error_exit_codes(tmp_path, capsys):
    assert run(capsys, "train", tmp_path / "nope.json", "--folds", 2)[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["train", "--bogus-flag"])
    assert e.value.code == 2
    bad = {"format_version": 42, "views": [], "points": []}
    io.write_json(tmp_path / "v.json", bad)
    code, _, err = run(capsys, "featurize", tmp_path / "v.json", tmp_path / "o.json")
    assert code == 4 and "format" in err
    d = {"format_version": 1, "views": [{"view_id": 0, "origin": [0, 0, 1]}],
         "points": [[0, 0, 0, 0, 0, 0, 0]], "segments": [{"id": 0, "point_indices": [3]}]}
    io.write_json(tmp_path / "i.json", d)
    assert run(capsys, "featurize", tmp_path / "i.json", tmp_path / "o.json")[0] == 5
    spec = stacked_spec().to_dict()
    spec["counts"]["upperA"] = 9
    io.write_json(tmp_path / "s.json", spec)
    code, _, err = run(capsys, "gen", "--spec", tmp_path / "s.json", "--out", tmp_path / "g")
    assert code == 7 and "upperA above lowerA" in err
    assert run(capsys, "gen", "--out", tmp_path / "g")[0] == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "scenemrf.cli", "gen", "--preset", "separable",
                          "--n", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "scenes=1" in res.stdout
    assert (tmp_path / "scene_000.json").exists() and (tmp_path / "label_space.json").exists()
