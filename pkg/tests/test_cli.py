import csv
import json

import pytest

from fvclust import cli
from fvclust.exceptions import NumericalBreakdown
from fvclust.io import load_partition, read_json
from fvclust.pipeline import validate_record


@pytest.fixture
def planted(tmp_path):
    g, t = tmp_path / "g.txt", tmp_path / "truth.txt"
    rc = cli.main(["gen", "planted", "--n", "90", "--q", "3", "--mu-mix", "0.05",
                   "--avg-degree", "12", "--seed", "1", "--out", str(g), "--truth", str(t)])
    assert rc == 0
    return g, t


def test_cd_end_to_end(tmp_path, planted):
    g, t = planted
    out, labels, trace = tmp_path / "r.json", tmp_path / "l.txt", tmp_path / "t.csv"
    rc = cli.main(["cd", str(g), "--q", "3", "--truth", str(t), "--out", str(out),
                   "--labels-out", str(labels), "--trace-csv", str(trace)])
    assert rc == 0
    rec = read_json(out)
    validate_record(rec)
    assert rec["metrics"]["nmi"] == 1.0
    assert load_partition(labels).n == 90
    with open(trace) as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {"stage", "k", "F", "eta", "took_effect"}


def test_cd_repeat_sweep(tmp_path, planted):
    g, t = planted
    sweep = tmp_path / "s.csv"
    rc = cli.main(["cd", str(g), "--q", "3", "--repeat", "3", "--jobs", "2", "--init", "random",
                   "--truth", str(t), "--out", str(tmp_path / "r.json"), "--sweep-csv", str(sweep)])
    assert rc == 0
    recs = read_json(tmp_path / "r.json")
    assert [r["config"]["seed"] for r in recs] == [0, 1, 2]
    with open(sweep) as fh:
        assert [int(r["seed"]) for r in csv.DictReader(fh)] == [0, 1, 2]


def test_metrics_command(tmp_path, planted, capsys):
    g, t = planted
    assert cli.main(["metrics", str(t), str(t), "--graph", str(g)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["nmi"] == 1.0 and rep["modularity_Q"] > 0


def test_ncut_image(tmp_path):
    img, truth = tmp_path / "a.pgm", tmp_path / "t.txt"
    assert cli.main(["gen", "image", "--n", "12", "--q", "2", "--out", str(img),
                     "--truth", str(truth)]) == 0
    out = tmp_path / "r.json"
    assert cli.main(["ncut", str(img), "--q", "2", "--radius", "2", "--truth", str(truth),
                     "--out", str(out)]) == 0
    rec = read_json(out)
    assert rec["input"]["image_shape"] == [12, 12] and rec["metrics"]["nmi"] == 1.0


def test_ncut_single_lambda(tmp_path):
    g = tmp_path / "w.txt"
    g.write_text("0 1 1\n1 2 1\n0 2 1\n3 4 1\n4 5 1\n3 5 1\n2 3 0.01\n")
    out = tmp_path / "r.json"
    assert cli.main(["ncut", str(g), "--q", "2", "--lambda", "0.05", "--out", str(out)]) == 0
    rec = read_json(out)
    assert rec["config"]["lambdas"] == [0.05]
    assert len(set(rec["labels"][:3])) == 1 and rec["labels"][0] != rec["labels"][3]


def test_parse_error_exit(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\nnot an edge\n")
    assert cli.main(["cd", str(bad), "--q", "2"]) == cli.EXIT_PARSE
    assert cli.main(["cd", str(tmp_path / "missing.txt"), "--q", "2"]) == cli.EXIT_PARSE


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["cd", "g.txt", "--q", "2", "--mode", "sloppy"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2


def test_infeasible_spec_exit(tmp_path, planted):
    g, t = planted
    assert cli.main(["cd", str(g), "--q", "1"]) == cli.EXIT_SPEC
    assert cli.main(["cd", str(g), "--q", "91"]) == cli.EXIT_SPEC
    assert cli.main(["gen", "planted", "--n", "10", "--q", "3",
                     "--out", str(tmp_path / "x.txt")]) == cli.EXIT_SPEC
    other = tmp_path / "p.txt"
    other.write_text("0\n1\n")
    assert cli.main(["cd", str(g), "--q", "3", "--truth", str(other)]) == cli.EXIT_SPEC


def test_numerical_failure_exit(tmp_path, planted, monkeypatch):
    g, _ = planted

    def broken(*a, **k):
        raise NumericalBreakdown("forced")

    monkeypatch.setattr("fvclust.pipeline.detect_communities", broken)
    out = tmp_path / "r.json"
    assert cli.main(["cd", str(g), "--q", "3", "--out", str(out)]) == cli.EXIT_NUMERIC
    assert read_json(out)["error"]["type"] == "NumericalBreakdown"


def test_exit_code_mapping():
    assert cli.exit_code_for("SubproblemStalled") == 3
    assert cli.exit_code_for("EmptyGraph") == 4
    assert cli.exit_code_for("ParseError") == 2


def test_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)


def test_synthetic_image():
    img, truth = cli.synthetic_image(8, 4, noise=0.0)
    assert img.shape == (8, 8) and truth.n_clusters() == 4
    assert img.min() >= 0 and img.max() <= 1
