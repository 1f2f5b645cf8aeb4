import json

import pytest

from fsboost.cli import build_parser, main
from fsboost.io import read_manifest, read_params
from fsboost.head import init_params
from fsboost.tensor import Rng, derive_seed


def run(*argv):
    assert main([str(a) for a in argv]) == 0


def pipeline(root, seed=7):
    root.mkdir()
    data = root / "data"
    run("--seed", seed, "generate", "--out", data, "--preset", "small")
    common = ["--manifest", data / "manifest.json", "--folds", data / "folds.json", "--fold", 0, "--fold", 1]
    run("--seed", seed, "train", *common, "--iterations", 8, "--hidden", 8, "--out", root / "heads" / "f{fold}.fshp")
    params = ["--params", root / "heads" / "f{fold}.fshp"]
    run("--seed", seed, "eval", *common, *params, "--variant", "B+C1+C2", "--episodes", 4, "--num-experts", 3,
        "--out", root / "eval.csv", "--trace", root / "trace.json")
    run("--seed", seed, "sweep", *common, *params, "--n-values", 1, 2, "--episodes", 3, "--out", root / "sweep.csv")
    return root


def test_pipeline_is_byte_identical(tmp_path):
    a, b = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    for rel in ("eval.csv", "sweep.csv", "trace.json", "heads/f0.fshp", "heads/f1.losses.csv",
                "data/manifest.json", "data/folds.json"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    text = (a / "eval.csv").read_text()
    assert text.startswith("# fsboost eval\n# config ")
    assert "fold,class_id,tp,fp,fn,iou" in text
    trace = json.loads((a / "trace.json").read_text())
    assert len(trace) == 8 and len(trace[0]["experts"]) == 3


def test_iterations_zero_persists_init(tmp_path):
    run("--seed", 2, "generate", "--out", tmp_path, "--preset", "small")
    run("--seed", 2, "train", "--manifest", tmp_path / "manifest.json", "--folds", tmp_path / "folds.json",
        "--fold", 0, "--iterations", 0, "--hidden", 4, "--out", tmp_path / "p{fold}.fshp")
    ref = init_params(read_manifest(tmp_path / "manifest.json")[0].d, Rng(derive_seed(2, 0)), 4)
    got = read_params(tmp_path / "p0.fshp")
    assert all(x.tobytes() == y.tobytes() for x, y in zip(got.arrays(), ref.arrays()))


def test_single_class_manifest(tmp_path):
    run("generate", "--out", tmp_path, "--preset", "small", "--num-classes", 1)
    assert {e["class_id"] for e in json.loads((tmp_path / "manifest.json").read_text())} == {0}


def test_errors_are_reported(tmp_path, capsys):
    code = main(["eval", "--manifest", str(tmp_path / "nope.json"), "--folds", "x", "--params", "p",
                 "--out", str(tmp_path / "o.csv")])
    assert code == 1 and "nope.json" in capsys.readouterr().err


def test_help_lists_variants(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["eval", "--help"])
    out = capsys.readouterr().out
    for name in ("B+C1", "B+C2", "B+C1+C2", "Our-K-shot", "Average"):
        assert name in out
