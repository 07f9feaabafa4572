import hashlib
import json

import pytest

from eegtrust.cli import RunConfig, build_parser, main, parse_seeds
from eegtrust.errors import ConfigError
from eegtrust.nn import load_checkpoint

TINY = ["--model-dim", "8", "--n-heads", "2", "--n-blocks", "1", "--mlp-dim", "8", "--max-epochs", "1",
        "--dtype", "float32"]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def features(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "raw"), "--subjects", "2", "--trials", "10", "--duration", "6"]) == 0
    assert main(["preprocess", "--in", str(root / "raw"), "--out", str(root / "pre")]) == 0
    assert main(["extract", "--in", str(root / "pre"), "--out", str(root / "f.bin")]) == 0
    return root / "f.bin"


def run_pipeline(features, out):
    out.mkdir()
    f = str(features)
    assert main(["eval", "--model", "nb", "--mode", "trial", "--seeds", "0..1", "--features", f,
                 "--out", str(out / "nb.json")]) == 0
    assert main(["ablate", "--mode", "slice", "--features", f, "--out", str(out / "ab.json"), *TINY]) == 0
    assert main(["report", str(out / "nb.json"), str(out / "ab.json"), "--out", str(out / "report.md")]) == 0


def test_pipeline_is_deterministic(features, tmp_path):
    run_pipeline(features, tmp_path / "a")
    run_pipeline(features, tmp_path / "b")
    for name in ("nb.json", "ab.json", "report.md", "report_roc_nb_trial_wise.csv", "report_roc_ablation_slice_wise.csv"):
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name), name
    doc = json.loads((tmp_path / "a" / "nb.json").read_text())
    assert doc["seed"] == 0 and len(doc["config_hash"]) == 64
    assert len(doc["folds"]) == 2 * 2 * 5 and doc["folds"][0]["roc"][0] == [0.0, 0.0]
    ab = json.loads((tmp_path / "a" / "ab.json").read_text())
    assert ab["plans_match"] is True
    md = (tmp_path / "a" / "report.md").read_text()
    assert "Trial-wise cross-validation" in md and "| NB |" in md and "noSP" in md


def test_synth_is_byte_identical(tmp_path):
    for name in ("x", "y"):
        assert main(["synth", "--out", str(tmp_path / name), "--subjects", "1", "--trials", "2", "--duration", "2",
                     "--preset", "spatial"]) == 0
    assert sha(tmp_path / "x" / "sub01" / "trial01.f32") == sha(tmp_path / "y" / "sub01" / "trial01.f32")
    assert sha(tmp_path / "x" / "manifest.json") == sha(tmp_path / "y" / "manifest.json")


def test_train_writes_stamped_checkpoint(features, tmp_path):
    assert main(["train", "--model", "svm", "--features", str(features), "--out", str(tmp_path / "m.ckpt")]) == 0
    header, params = load_checkpoint(tmp_path / "m.ckpt")
    assert header["extra"]["model_id"] == "svm" and "config_hash" in header["extra"]
    assert params["w"].shape == (256,)


def test_unknown_config_key_exits_1(features, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "nb", "learning_rate": 0.1}))
    code = main(["train", "--config", str(cfg), "--features", str(features), "--out", str(tmp_path / "m")])
    assert code == 1
    assert "learning_rate" in capsys.readouterr().err


def test_unknown_nested_key_exits_1(features, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"vit": {"depth": 3}}))
    assert main(["eval", "--config", str(cfg), "--features", str(features), "--out", str(tmp_path / "r")]) == 1
    assert "depth" in capsys.readouterr().err


def test_eval_without_features_exits_2(tmp_path, capsys):
    missing = tmp_path / "features.bin"
    assert main(["eval", "--model", "nb", "--features", str(missing), "--out", str(tmp_path / "r.json")]) == 2
    assert f"features not found at {missing}" in capsys.readouterr().err


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--model", "forest", "--features", "x", "--out", "y"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exits_3(features, tmp_path, capsys):
    code = main(["train", "--model", "vit", "--features", str(features), "--out", str(tmp_path / "m"),
                 "--init-std", "1e30", *TINY])
    assert code == 3
    assert "numerical" in capsys.readouterr().err


def test_config_hash_stable_under_key_order():
    a = RunConfig.from_dict({"model": "knn", "seeds": [0, 1], "hyper": {"lr": 0.01, "batch_size": 8}})
    b = RunConfig.from_dict({"hyper": {"batch_size": 8, "lr": 0.01}, "seeds": [0, 1], "model": "knn"})
    assert a.hash() == b.hash()
    assert a.hash() != RunConfig.from_dict({"model": "svm"}).hash()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})


def test_parse_seeds():
    assert parse_seeds("0..4") == [0, 1, 2, 3, 4]
    assert parse_seeds("3,1") == [3, 1]


def test_help_lists_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["eval"].format_help()
    for flag in ("--mode", "--seeds", "--model-dim", "--lr", "--knn-k", "--max-epochs"):
        assert flag in text
    assert "default: 64" in text and "default: 500" in text and "default: 5)" in text
    pre = sub["preprocess"].format_help()
    assert "(0.5, 60.0)" in pre and "50.0" in pre and "--skip-filtering" in pre
