import csv
import json

import numpy as np
import pytest

from coherent_ratchet.config import parse_config
from coherent_ratchet.io import ResultBundle, emit, new_bundle, read_bundle, render


def _bundle():
    b = ResultBundle({"code_version": "x", "created_utc": "2020-01-01T00:00:00Z"})
    b.add_columns("main", t=np.array([0.0, 0.5]), p=np.array([1.0, 1 / 3]))
    b.add_table("summary", ["name", "value", "flag"], [("a", 2, True), ("b", float("nan"), False)])
    return b


def test_emit_is_deterministic(tmp_path):
    b = _bundle()
    first = [p.read_bytes() for p in emit(b, tmp_path / "a.csv")]
    second = [p.read_bytes() for p in emit(b, tmp_path / "a.csv")]
    assert first == second
    assert (tmp_path / "a.csv").read_text() == "t,p\n0,1\n0.5,0.333333333\n"
    assert (tmp_path / "a.summary.csv").exists()


def test_empty_bundle_writes_metadata_only(tmp_path):
    written = emit(ResultBundle({"k": 1}), tmp_path / "e.csv")
    assert [p.name for p in written] == ["e.meta.json"]
    meta = json.loads((tmp_path / "e.meta.json").read_text())
    assert meta == {"metadata": {"k": 1}, "tables": {}}


def test_csv_round_trip(tmp_path):
    emit(_bundle(), tmp_path / "r.csv")
    with open(tmp_path / "r.summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["name", "value", "flag"]
    back = read_bundle(tmp_path / "r.csv")
    assert back.tables["main"].columns == ["t", "p"]
    assert back.tables["main"].rows[1][1] == pytest.approx(1 / 3, rel=1e-8)


def test_metadata_records_config_and_seed():
    cfg = parse_config("task: ratchet-walk\nseed: 42\n")
    b = new_bundle(cfg, note="x")
    assert b.metadata["seed"] == 42
    assert b.metadata["config"]["task"] == "ratchet-walk"
    assert "code_version" in b.metadata and b.metadata["note"] == "x"


def test_table_shape_checked():
    b = ResultBundle()
    with pytest.raises(ValueError):
        b.add_table("t", ["a", "b"], [(1,)])
    b.add_table("t", ["a"], [(1,)])
    with pytest.raises(ValueError):
        b.add_table("t", ["a"], [(1,)])


def test_render_lists_every_table():
    text = render(_bundle())
    assert "# main\n" in text and "# summary\n" in text


def test_io_failure_surfaces(tmp_path):
    with pytest.raises(OSError):
        emit(_bundle(), tmp_path / "missing" / "x.csv")
