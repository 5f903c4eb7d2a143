import csv
import io
import json

import numpy as np
import pytest

from topk_smoothing.cli import main, parse_grid


@pytest.fixture
def dataset_file(tmp_path):
    rng = np.random.default_rng(5)
    examples = []
    for j in range(4):
        p = rng.dirichlet(np.full(5, 0.5))
        examples.append({"id": f"e{j}", "true_label": int(np.argmax(p)), "probabilities": p.tolist()})
    path = tmp_path / "data.json"
    path.write_text(json.dumps({"label_count": 5, "examples": examples}))
    return path


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1,0.5") == [0.1, 0.5]


def test_certify_stdout(dataset_file, capsys):
    main(["certify", "--dataset", str(dataset_file), "--n", "2000", "--k", "2", "--alpha", "0.01"])
    out = rows(capsys.readouterr().out)
    assert len(out) == 4
    assert set(out[0]) == {"example_id", "true_label", "abstained", "radius_lower", "best_t", "n", "method"}
    assert out[0]["n"] == "2000" and out[0]["method"] == "simuem"


def test_certify_selectors(dataset_file, capsys):
    main(["certify", "--dataset", str(dataset_file), "--n", "500", "--k", "1", "--examples", "e1,e3",
          "--label", "0", "--bound-method", "binocp"])
    out = rows(capsys.readouterr().out)
    assert [r["example_id"] for r in out] == ["e1", "e3"]
    assert out[0]["method"] == "binocp"


def test_predict(dataset_file, capsys):
    main(["predict", "--dataset", str(dataset_file), "--n", "2000", "--k", "2", "--alpha", "0.01"])
    out = rows(capsys.readouterr().out)
    for row in out:
        if row["abstained"] == "0":
            assert len(row["predicted_labels"].split()) == 2


def test_predict_has_no_mu(dataset_file):
    with pytest.raises(SystemExit):
        main(["predict", "--dataset", str(dataset_file), "--mu", "0.1"])


def test_curve_files_identical(dataset_file, tmp_path):
    args = ["curve", "--dataset", str(dataset_file), "--n", "2000", "--k", "2", "--grid", "0:1:0.1"]
    main(args + ["--out", str(tmp_path / "a.csv"), "--per-example", str(tmp_path / "a_rows.csv")])
    main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"])
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    curve = rows(a.decode())
    assert len(curve) == 11
    accuracies = [float(r["approx_certified_topk_accuracy"]) for r in curve]
    assert all(y <= x for x, y in zip(accuracies, accuracies[1:]))
    assert len(rows((tmp_path / "a_rows.csv").read_text())) == 4
    assert (tmp_path / "a.csv.meta.json").exists()


def test_tightness_inline(capsys):
    main(["tightness", "--label", "0", "--lower", "0.5", "--upper", "0,0.25,0.25", "--k", "2", "--sigma", "1"])
    out = rows(capsys.readouterr().out)
    assert [r["consistent"] for r in out] == ["1"] * 4
    assert [r["violated"] for r in out] == ["0", "0", "1", "1"]


def test_tightness_file(tmp_path, capsys):
    path = tmp_path / "b.json"
    path.write_text(json.dumps({"target_label": 1, "lower": 0.6, "upper": [0.4, 0.0]}))
    main(["tightness", "--bounds-file", str(path), "--k", "1", "--sigma", "0.5", "--lam", "0,3"])
    out = rows(capsys.readouterr().out)
    assert [r["violated"] for r in out] == ["0", "1"]


def test_errors_exit_cleanly(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["certify", "--dataset", str(tmp_path / "nope.json")])
    assert exc.value.code == 2
    assert "nope.json" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["tightness", "--label", "0", "--lower", "0.9", "--upper", "0,0.2,0.2", "--k", "2"])
