import os
import pathlib

import pytest

import termnet

DATA = pathlib.Path(os.environ.get("TERMNET_TEST_DATA", pathlib.Path(__file__).parent.parent / "data"))


@pytest.fixture(scope="module")
def dictionary():
    return termnet.Dictionary.load(str(DATA / "dictionary.tsv"), str(DATA / "blocklist.txt"))


@pytest.fixture()
def bundle(tmp_path):
    out = tmp_path / "bundle"
    code, stdout, stderr = termnet.run_cli([
        "build", "--dictionary", str(DATA / "triangle_dictionary.tsv"),
        "--units", str(DATA / "triangle_units.jsonl"), "--layer", "L", "--out", str(out),
    ])
    assert code == 0, stderr
    assert stdout.startswith("layer L: 5 units")
    return termnet.Bundle(str(out))


def test_dictionary_and_tagging(dictionary):
    assert dictionary.resolve("Prozac") == "fluoxetine"
    assert dictionary.resolve("cold") is None
    assert "fluoxetine" in dictionary.roots()
    assert termnet.tag(dictionary, "Prozac gave me a headache, then prozac again") == ["fluoxetine", "headache"]


def test_cooccurrence_fixture():
    d = termnet.Dictionary.parse("surface\tparent\ttype\na\t-\tdrug\nb\t-\tdrug\nc\t-\tdrug\n")
    result = termnet.cooccurrence(d, [["a", "b"], ["a", "b", "c"], ["b", "c"]])
    assert result["diagonal"] == {"a": 3, "b": 4, "c": 3}
    p = {(e["x"], e["y"]): e["p"] for e in result["edges"]}
    assert p == {("a", "b"): 0.4, ("a", "c"): 0.2, ("b", "c"): 0.4}
    dist = {(e["x"], e["y"]): e["d"] for e in result["edges"]}
    assert dist[("a", "b")] == 1.5
    with pytest.raises(termnet.NotFoundError):
        termnet.cooccurrence(d, [["a", "zzz"]])


def test_metric_backbone_triangle():
    result = termnet.metric_backbone([("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 3.0)])
    assert result["fraction_metric"] == pytest.approx(2 / 3)
    labels = {(e["x"], e["y"]): e["label"] for e in result["edges"]}
    assert labels[("a", "c")] == "semi_metric"
    ac = next(e for e in result["edges"] if e["y"] == "c" and e["x"] == "a")
    assert ac["distortion"] == 1.5
    tsv = (DATA / "triangle.tsv").read_text()
    assert termnet.backbone_from_tsv(tsv)["metric_count"] == 2
    with pytest.raises(ValueError):
        termnet.metric_backbone([("a", "b", -1.0)])


def test_bundle_queries(bundle):
    assert bundle.layers == ["L"]
    assert "66.67%" in bundle.stats_table()
    status, body = termnet.query(bundle, "/ego", layer="L", term="a", backbone=True)
    assert status == 200
    assert [n["term"] for n in body["nodes"]] == ["a", "b"]
    assert len(body["edges"]) == 1
    status, body = termnet.query(bundle, "/edge", layer="L", x="a", y="b")
    assert [u["unit_id"] for u in body["units"]] == ["u1", "u2"]
    status, body = termnet.query(bundle, "/edge", layer="L", x="a")
    assert status == 400
    assert body["error"]["code"] == "missing_parameter"


def test_cli_errors(tmp_path):
    code, _, stderr = termnet.run_cli(["stats", "--bundle", str(tmp_path / "missing")])
    assert code == 2
    assert stderr.startswith("error:")
    with pytest.raises(termnet.DataError):
        termnet.Bundle(str(tmp_path / "missing"))
