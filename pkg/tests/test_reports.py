import csv
import json

import numpy as np
import pytest
from pydantic import ValidationError

from backend.reports import (
    CSV_HEADER,
    LemmaReport,
    all_passed,
    combine_reports,
    config_hash,
    make_report,
    merge_reports,
    read_jsonl,
    write_jsonl,
    write_summary_csv,
)
from lab_config import LIB_VERSION


def _report(lemma="kato", margin=0.1, slack=0.0, **inputs):
    return make_report(lemma, inputs or {"grid_n": 8}, {"x": 1.0}, {"x": 2.0}, 1.0, 2.0, margin, slack)


def test_pass_follows_margin():
    assert _report(margin=0.0).passed
    assert not _report(margin=-1e-3).passed
    assert _report(margin=-1e-3, slack=1e-2).passed


def test_inconsistent_pass_flag_rejected():
    with pytest.raises(ValidationError):
        LemmaReport(lemma="kato", margin=-1.0, slack=0.0, passed=True)


def test_json_uses_pass_key():
    line = json.loads(_report().to_json_line())
    assert line["pass"] is True
    assert "passed" not in line
    assert line["version"] == LIB_VERSION


def test_jsonl_round_trip(tmp_path):
    reports = [_report("kato"), _report("hartree", margin=-0.5)]
    path = write_jsonl(reports, tmp_path / "out" / "r.jsonl")
    loaded = read_jsonl(path)
    assert loaded == reports
    assert path.read_text().endswith("\n")


def test_summary_csv_layout(tmp_path):
    path = write_summary_csv([_report(margin=-0.25)], tmp_path / "s.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == CSV_HEADER
    assert rows[1][0] == "kato"
    assert json.loads(rows[1][1]) == {"grid_n": 8}
    assert float(rows[1][4]) == -0.25
    assert rows[1][5] == "false"


def test_config_hash_is_stable_and_short():
    a = config_hash({"z": 2.0, "grid_n": 16})
    b = config_hash({"grid_n": 16, "z": 2.0})
    assert a == b
    assert len(a) == 16
    int(a, 16)
    assert config_hash({"z": 3.0, "grid_n": 16}) != a


def test_with_config_sets_hash():
    tagged = _report().with_config("0123456789abcdef")
    assert tagged.config_hash == "0123456789abcdef"
    assert tagged.passed


def test_merge_orders_by_lemma_then_inputs():
    reports = [_report("kato", grid_n=32), _report("bessel_accuracy"), _report("kato", grid_n=16)]
    merged = merge_reports(reports)
    assert [r.lemma for r in merged] == ["bessel_accuracy", "kato", "kato"]
    assert [r.inputs["grid_n"] for r in merged[1:]] == [16, 32]


def test_combine_takes_worst_part():
    parts = [_report("a", margin=0.3), _report("b", margin=-0.02, slack=0.05)]
    combined = combine_reports("both", parts, {"n": 2})
    assert combined.margin == pytest.approx(0.03)
    assert combined.passed
    assert all_passed(parts)
    assert not all_passed([*parts, _report("c", margin=-1.0)])


def test_numpy_scalars_serialize():
    report = make_report("kato", {"n": int(np.int64(3))}, {"ok": bool(np.bool_(True))}, {}, np.float64(1.0), 2.0, np.float64(0.5))
    assert json.loads(report.to_json_line())["measured"]["ok"] is True
