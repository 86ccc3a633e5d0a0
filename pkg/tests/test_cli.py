import json
import os

import pytest

from hetproof import cli
from hetproof.runner import default_config_path, load_config


def _toy(tmp_path, name, *extra):
    out = tmp_path / name
    code = cli.main(["run", "--case", "toy-circle", "--out", str(out), *extra])
    return code, out / "toy-circle"


def test_toy_run_and_check(tmp_path, capsys):
    code, d = _toy(tmp_path, "a")
    assert code == 0
    for f in ("certificate.json", "segments.csv", "summary.txt"):
        assert (d / f).exists()
    doc = json.loads((d / "certificate.json").read_text())
    assert doc["status"] == "pass" and doc["curve"]["closure"]["verified"]
    capsys.readouterr()
    assert cli.main(["check", str(d / "certificate.json")]) == 0
    assert "VERIFIED" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    _, a = _toy(tmp_path, "a")
    _, b = _toy(tmp_path, "b")
    for f in ("certificate.json", "segments.csv", "summary.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_segments_csv_rows_are_passing_segments(tmp_path):
    _, d = _toy(tmp_path, "a")
    rows = (d / "segments.csv").read_text().strip().splitlines()
    doc = json.loads((d / "certificate.json").read_text())
    segs = doc["curve"]["segments"]
    assert len(rows) - 1 == len(segs) and all(s["pass"] for s in segs)


def test_tampered_certificate_is_rejected(tmp_path, capsys):
    _, d = _toy(tmp_path, "a")
    path = d / "certificate.json"
    doc = json.loads(path.read_text())
    doc["curve"]["segments"][3]["Y"] = [["-1e-15", "1e-15"]]
    path.write_text(json.dumps(doc))
    assert cli.main(["check", str(path)]) == 1
    assert "REJECTED" in capsys.readouterr().out


def test_failure_report(tmp_path):
    cfg = json.loads(open(default_config_path()).read())
    cfg["cases"]["toy-circle"].update({"segments": 4, "max_depth": 0})
    path = tmp_path / "cases.json"
    path.write_text(json.dumps(cfg))
    code, d = _toy(tmp_path, "f", "--config", str(path))
    assert code == 1
    rep = json.loads((d / "failure.json").read_text())
    assert rep["status"] == "fail" and rep["stage"] == "curve" and rep["error"] == "InclusionFailed"
    assert "newton_image" in rep


def test_segments_override():
    assert load_config(None, "toy-circle", segments=32).segments == 32
    assert load_config(None, "loop").l1 == 9


def test_bad_case_rejected():
    with pytest.raises(SystemExit):
        cli.main(["run", "--case", "nope"])


def test_invalid_config_values():
    with pytest.raises(ValueError):
        load_config(None, "loop", order=1)
