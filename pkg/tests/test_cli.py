import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from brbvs import cli
from brbvs.plot import emit_plot, render_svg

GOLDEN = Path(__file__).parent / "golden"
SVG = "{http://www.w3.org/2000/svg}"


FREE_KEYS = {"freq", "A_hat", "pi_hat"}  # mappings keyed by covariate name or set size


def _shape(obj):
    """Key structure of a JSON document, with leaves replaced by their type names."""
    if isinstance(obj, dict):
        return {k: ({"*": _shape(next(iter(v.values())))} if k in FREE_KEYS and v else _shape(v))
                for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [_shape(obj[0])] if obj else []
    return type(obj).__name__


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    csv = root / "sim.csv"
    assert cli.main(["simulate", "--scenario", "A", "--n", "240", "--p", "5", "--seed", "1", "--out", str(csv)]) == 0
    return csv


def test_simulate_writes_csv_and_sidecar(sim_csv):
    side = json.loads(sim_csv.with_suffix(".truth.json").read_text())
    assert side["truth"]["s1"] == ["x1", "x2"]
    assert sim_csv.read_text().splitlines()[0].startswith("t11,t12,t21,t22,cens1,cens2,x1")


def test_brbvs_schema_matches_golden(sim_csv, tmp_path):
    out, svg = tmp_path / "b.json", tmp_path / "b.svg"
    code = cli.main([
        "brbvs", "--data", str(sim_csv), "--kmax", "3", "--m", "120", "--B", "2", "--seed", "3",
        "--out", str(out), "--plot", str(svg),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "brbvs" and doc["schema_version"] == cli.OUTPUT_SCHEMA
    golden = json.loads((GOLDEN / "brbvs_schema.json").read_text())
    assert _shape(doc) == golden
    root = ET.parse(svg).getroot()
    assert root.tag == SVG + "svg"


def test_fit_schema_matches_golden(sim_csv, tmp_path, capsys):
    out = tmp_path / "f.json"
    code = cli.main(["fit", "--data", str(sim_csv), "--eta1", "x1,x2", "--eta2", "x1,x3", "--out", str(out)])
    assert code == 0
    assert "COPULA: Clayton" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert _shape(doc) == json.loads((GOLDEN / "fit_schema.json").read_text())


def test_evaluate_from_files(sim_csv, tmp_path, capsys):
    out = tmp_path / "b.json"
    cli.main(["--data", str(sim_csv), "--kmax", "3", "--m", "120", "--B", "1", "--out", str(out)])
    ev = tmp_path / "e.json"
    code = cli.main(["evaluate", "--results", str(out), "--truth", str(sim_csv.with_suffix(".truth.json")), "--out", str(ev)])
    assert code == 0
    rep = json.loads(ev.read_text())["result"]["reports"]["input"]
    assert set(rep) == {"n_rep", "fp", "fn", "mean_size", "mean_hits", "containment"}


def test_reference_invocation_parses(monkeypatch):
    seen = {}
    monkeypatch.setattr(cli, "cmd_brbvs", lambda args: seen.update(vars(args)) or 0)
    argv = ["--data", "x.csv", "--kmax", "5", "--copula", "PL", "--margins", "PO,PO", "--m", "314",
            "--tau", "0.5", "--B", "50", "--metric", "FIM"]
    assert cli.main(argv) == 0
    assert (seen["kmax"], seen["copula"], seen["margins"], seen["m"], seen["B"]) == (5, "PL", ("PO", "PO"), 314, 50)


def test_errors_exit_nonzero_with_artifact(sim_csv, tmp_path):
    out = tmp_path / "err.json"
    code = cli.main(["brbvs", "--data", str(sim_csv), "--kmax", "9", "--B", "1", "--out", str(out)])
    assert code == 1
    err = json.loads(out.read_text())
    assert "kmax" in err["error"] and err["command"] == "brbvs"
    ok_out = tmp_path / "ok.json"
    assert cli.main(["fit", "--data", str(sim_csv), "--eta1", "x1", "--out", str(ok_out)]) == 0
    assert "error" not in json.loads(ok_out.read_text())
    with pytest.raises(SystemExit):
        cli.main(["fit", "--data", str(sim_csv), "--margins", "PH"])
    bad = tmp_path / "bad.csv"
    bad.write_text("t11,t12,t21,t22,cens1,cens2,x1\n1,,1,,Q,U,0.5\n")
    assert cli.main(["fit", "--data", str(bad)]) == 1


def test_dumps_handles_non_finite():
    text = cli.dumps({"a": float("inf"), "b": [float("nan"), 1.0]})
    assert json.loads(text) == {"a": "inf", "b": ["nan", 1.0]}


def test_svg_bars_and_empty_panel(tmp_path):
    text = render_svg([[("x1", 0.53), ("x2", 0.93), ("x3", 0.22)], []])
    root = ET.fromstring(text)
    bars = [r for r in root.iter(SVG + "rect") if r.get("data-frequency")]
    assert [float(b.get("data-frequency")) for b in bars] == [0.53, 0.93, 0.22]
    heights = [float(b.get("height")) for b in bars]
    assert heights[1] > heights[0] > heights[2]
    assert heights[0] / heights[1] == pytest.approx(0.53 / 0.93, rel=0.01)
    assert any(t.text == "no variables selected" for t in root.iter(SVG + "text"))
    doc = {"names": ["x1", "x2"], "margins": [{"freq": {"x2": 1.0, "x1": 0.5}}, {"freq": {}}]}
    emit_plot(doc, tmp_path / "p.svg")
    names = [r.get("data-name") for r in ET.parse(tmp_path / "p.svg").getroot().iter(SVG + "rect") if r.get("data-name")]
    assert names == ["x1", "x2"]
