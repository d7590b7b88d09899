import csv
import json

import pytest

from caltag.experiments import ExperimentResult
from caltag.report import SUMMARY_COLUMNS, ReportIOError, emit_report, read_records, write_records


def _result(method, preset, test, experiment="clutter", **params):
    return ExperimentResult(
        experiment=experiment,
        method=method,
        clutter_preset=preset,
        params=params,
        train_rmse=[t * 0.8 for t in test],
        test_rmse=list(test),
        n_valid=9,
        failures=[],
        status="ok",
        config_hash="abc",
        seed=1,
    )


def _clutter_results():
    return [
        _result(m, p, [0.01 * (i + 1), 0.012 * (i + 1)])
        for i, p in enumerate(["low", "medium", "high"])
        for m in ("caltag", "corner_reflector")
    ]


def test_empty_results_give_header_only(tmp_path):
    files = emit_report([], tmp_path)
    assert [f.name for f in files] == ["results.jsonl", "summary.csv"]
    assert (tmp_path / "results.jsonl").read_text() == ""
    assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"


def test_clutter_report_layout(tmp_path):
    emit_report(_clutter_results(), tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "clutter.csv")))
    assert [(r["method"], r["clutter_preset"]) for r in rows] == [
        ("caltag", "low"),
        ("caltag", "medium"),
        ("caltag", "high"),
        ("corner_reflector", "low"),
        ("corner_reflector", "medium"),
        ("corner_reflector", "high"),
    ]
    assert float(rows[0]["test_mean"]) == pytest.approx(0.011)
    svg = (tmp_path / "clutter.svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg


def test_report_is_deterministic_and_order_free(tmp_path):
    res = _clutter_results() + [
        _result("corner_reflector", "medium", [0.02, 0.5], experiment="window", window_deg=10.0, window_m=0.2, angle_error_deg=e)
        for e in (0.0, 10.0)
    ]
    emit_report(res, tmp_path / "a")
    emit_report(list(reversed(res)), tmp_path / "b")
    for name in ("results.jsonl", "summary.csv", "clutter.csv", "clutter.svg", "window.csv", "window.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_records_round_trip(tmp_path):
    res = _clutter_results()
    write_records(tmp_path / "r.jsonl", res)
    back = read_records(tmp_path / "r.jsonl")
    assert sorted(r.to_record() for r in back) == sorted(r.to_record() for r in res)
    assert {json.loads(r.to_record())["test_mean"] for r in back} == {r.test_mean for r in res}


def test_io_errors_name_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError, match="file"):
        emit_report([], blocker / "sub")
    with pytest.raises(ReportIOError, match="missing.jsonl"):
        read_records(tmp_path / "missing.jsonl")
