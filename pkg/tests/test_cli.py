import json

import pytest

from fogv2x.cli import main
from fogv2x.report import ReportError, build_report

from conftest import SCENARIOS, full_coverage

OUTPUTS = ("messages.csv", "summary.json", "cloud.jsonl", "effective_config.json")


def _write(tmp_path, raw, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


def test_run_writes_all_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(SCENARIOS / "minimal.json"), "--out", str(out)]) == 0
    for name in OUTPUTS:
        assert (out / name).is_file()
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["policy"]["track_staleness_s"] == 1.0


def test_flags_override_config(tmp_path, monkeypatch):
    sc = _write(tmp_path, full_coverage(duration=5.0))
    monkeypatch.setenv("SIM_SEED", "77")
    out = tmp_path / "o"
    main(["run", "--scenario", str(sc), "--duration", "1.5", "--assist", "off", "--out", str(out)])
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["duration_s"] == 1.5 and eff["seed"] == 77 and eff["policy"]["assist"] is False
    main(["run", "--scenario", str(sc), "--seed", "3", "--out", str(out)])
    assert json.loads((out / "effective_config.json").read_text())["seed"] == 3


def test_zero_duration_is_config_error(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "minimal.json"), "--duration", "0", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "duration_s" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_input_file_untouched(tmp_path):
    sc = _write(tmp_path, full_coverage())
    before = sc.read_bytes()
    main(["run", "--scenario", str(sc), "--out", str(tmp_path / "o")])
    assert sc.read_bytes() == before


def test_json_only_format(tmp_path):
    out = tmp_path / "o"
    main(["run", "--scenario", str(SCENARIOS / "minimal.json"), "--format", "json", "--out", str(out)])
    assert not (out / "messages.csv").exists()
    assert (out / "summary.json").exists()


def test_report_identity_and_svg(tmp_path):
    sc = _write(tmp_path, full_coverage())
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["run", "--scenario", str(sc), "--out", str(d)])
    rep_path = tmp_path / "rep" / "report.json"
    assert main(["report", "--in", str(a), str(b), "--out", str(rep_path), "--svg"]) == 0
    rep = json.loads(rep_path.read_text())
    for ratios in rep["comparisons"][1]["ratios"].values():
        assert all(v in (1.0, None) for v in ratios.values())
    assert (tmp_path / "rep" / "pdr.svg").is_file()
    assert (tmp_path / "rep" / "goodput.svg").is_file()


def test_report_single_dir(tmp_path):
    main(["run", "--scenario", str(SCENARIOS / "minimal.json"), "--out", str(tmp_path / "a")])
    rep = build_report([tmp_path / "a"])
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert rep["runs"][0]["summary"] == summary
    assert rep["comparisons"][0]["ratios"]["run"]["pdr"] == 1.0


def test_report_missing_or_corrupt(tmp_path):
    with pytest.raises(ReportError, match="missing"):
        build_report([tmp_path])
    (tmp_path / "summary.json").write_text("{not json")
    with pytest.raises(ReportError, match="corrupt"):
        build_report([tmp_path])
    assert main(["report", "--in", str(tmp_path), "--out", str(tmp_path / "r.json")]) == 2
