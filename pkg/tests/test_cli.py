import json
import os

import pytest

from displab import cli
from displab.config import ExperimentConfig
from displab.suites import Check, SuiteResult


def _run(tmp_path, *extra):
    return cli.main(["run", "--suite", "specfun", "--out", str(tmp_path), "--seed", "3", *extra])


def _dirs(path):
    return sorted(p for p in os.listdir(path))


def test_list_potentials(capsys):
    assert cli.main(["list-potentials"]) == 0
    out = capsys.readouterr().out
    assert "gaussian" in out and "well" in out


def test_self_test(capsys):
    assert cli.main(["self-test"]) == 0
    assert "self-test: pass" in capsys.readouterr().out


def test_bad_suite_is_usage_error(tmp_path, capsys):
    assert cli.main(["run", "--suite", "nope", "--out", str(tmp_path)]) == 2
    assert "valid:" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[general]\nsede = 1\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "c.ini:2" in capsys.readouterr().err


def test_run_writes_manifest_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a) == 0 and _run(b) == 0
    (da,), (db,) = _dirs(a), _dirs(b)
    assert da.endswith("-specfun-seed3")
    m = json.loads((a / da / "manifest.json").read_text())
    assert m["complete"] and m["suites"]["specfun"]["status"] == "pass"
    assert m["config"]["seed"] == 3
    csvs = sorted(f for f in os.listdir(a / da) if f.endswith(".csv"))
    assert "2.6.csv" in csvs and "anchor_H3_2_1_.csv" in csvs
    for f in csvs + [f[:-4] + ".svg" for f in csvs if (a / da / (f[:-4] + ".svg")).exists()]:
        assert (a / da / f).read_bytes() == (b / db / f).read_bytes(), f
    strip = lambda d: [ln for ln in (d / "config.ini").read_text().splitlines() if not ln.startswith("out =")]
    assert strip(a / da) == strip(b / db)


def test_failed_write_leaves_no_partial_output(tmp_path, monkeypatch):
    def boom(item, path):
        raise OSError("disk full")
    monkeypatch.setattr(cli, "_svg", boom)
    res = SuiteResult("x", [Check("c", 0.0, 1.0, True)], 0.0)
    from displab.envelope import fit_envelope
    res.items.append(fit_envelope([({"s": 1.0}, 1.0)], lambda q: 1.0, "e", refined=[({"s": 1.0}, 1.0)]))
    with pytest.raises(OSError):
        cli.write_run([res], ExperimentConfig(), str(tmp_path), 0.0)
    assert _dirs(tmp_path) == []


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert _run(blocker) == 4


def test_report(tmp_path, capsys):
    assert _run(tmp_path) == 0
    (d,) = _dirs(tmp_path)
    capsys.readouterr()
    assert cli.main(["report", str(tmp_path / d)]) == 0
    out = capsys.readouterr().out
    assert "[specfun] pass" in out and "B.30_j0" in out


def test_report_version_mismatch_and_empty(tmp_path, capsys):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"version": "0.0.0", "suites": {}}))
    assert cli.main(["report", str(p)]) == 0
    out = capsys.readouterr().out
    assert "warning" in out and "no suites run" in out
    assert cli.main(["report", str(tmp_path / "missing.json")]) == 4


def test_exit_status_mapping():
    ok = SuiteResult("a", [Check("c", 0.0, 1.0, True)], 0.0)
    bad = SuiteResult("b", [Check("c", 2.0, 1.0, False)], 0.0)
    empty = SuiteResult("c", [], 0.0)
    assert cli.worst_status([ok]) == "pass"
    assert cli.worst_status([ok, empty]) == "inconclusive"
    assert cli.worst_status([ok, empty, bad]) == "fail"
    assert SuiteResult("d", [], 0.0, error="boom").status == "fail"
