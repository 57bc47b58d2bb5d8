import json
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from armlab import mc, records
from armlab.records import RunConfig, RunRecord, atomic_write, merge_records, to_csv


def arms_record(samples=100, start=0, workers=1):
    cfg = RunConfig("arms", "triangular", 0.5, "4,8,16", samples, seed=3, workers=workers,
                    k="1,4", start=start)
    rec = RunRecord(cfg, timestamp="2026-01-01T00:00:00Z")
    est = mc.estimate_pi_scales([1, 4], [4, 8, 16], samples, "triangular", 0.5, 3, workers,
                                start=start)
    for e in est.values():
        rec.add("estimate", e.to_dict())
    return rec


def test_pc_token_resolves_per_lattice():
    assert RunConfig("arms", "square", "pc").p == 0.59274605
    assert RunConfig("arms", "triangular", "PC").p == 0.5
    assert RunConfig("arms", "triangular").p == 0.5


@pytest.mark.parametrize("bad", [dict(p=1.5), dict(samples=0), dict(workers=0),
                                 dict(lattice="hex"), dict(ell="-1"), dict(scales="4,x"),
                                 dict(synthetic="1,2,3")])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ValueError):
        RunConfig("arms", **bad)


def test_run_id_ignores_workers_and_output():
    a = RunConfig("arms", scales="4,8", workers=1, out="a.jsonl")
    b = RunConfig("arms", scales="4,8", workers=4, out="b.jsonl", csv="b.csv")
    assert a.run_id == b.run_id
    assert a.run_id != RunConfig("arms", scales="4,8", seed=1).run_id


def test_config_round_trip():
    cfg = RunConfig("verify", "square", "pc", [4, 8, 16], 10, 2, synthetic="1.0,0.25")
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_record_round_trip():
    rec = arms_record()
    text = rec.dumps()
    back = RunRecord.loads(text)
    assert back == rec and back.dumps() == text
    head = json.loads(text.splitlines()[0])
    assert head["schema"] == records.SCHEMA and head["config"] == rec.config.to_dict()
    for line in text.splitlines()[1:]:
        row = json.loads(line)
        for key in ("run_id", "lattice", "p", "n", "statistic", "mean", "stderr", "count",
                    "seed", "version"):
            assert key in row


@given(st.lists(st.dictionaries(st.sampled_from(["statistic", "mean", "n", "note"]),
                                st.one_of(st.integers(), st.text(max_size=5),
                                          st.floats(allow_nan=False, allow_infinity=False)),
                                max_size=4), max_size=5))
def test_arbitrary_entries_round_trip(entries):
    rec = RunRecord(RunConfig("zmoments", scales="4"), timestamp="t")
    for e in entries:
        rec.add("exact", e)
    assert RunRecord.loads(rec.dumps()) == rec


def test_loads_rejects_foreign_files():
    with pytest.raises(ValueError):
        RunRecord.loads('{"type": "entry"}\n')
    with pytest.raises(ValueError):
        RunRecord.loads('{"type": "header", "schema": "other/9"}\n')


def test_timestamp_from_source_date_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert RunRecord(RunConfig("arms")).timestamp == "1970-01-01T00:00:00Z"


def test_merge_of_adjacent_ranges_equals_full_run():
    full = arms_record(100)
    merged = merge_records(arms_record(40), arms_record(60, start=40))
    assert merged.config.samples == 100 and merged.run_id == full.run_id
    assert merged.entries == full.entries
    again = merge_records(arms_record(60, start=40), arms_record(40))
    assert again.entries == full.entries


def test_merge_rejects_mismatched_runs():
    with pytest.raises(ValueError):
        merge_records(arms_record(40), arms_record(60, start=50))
    other = arms_record(40)
    other.config = RunConfig("arms", "square", 0.5, "4,8,16", 40, seed=3, k="1,4")
    with pytest.raises(ValueError):
        merge_records(other, arms_record(60, start=40))


def test_csv_export():
    rec = arms_record(20)
    lines = to_csv(rec).splitlines()
    assert lines[0].split(",") == list(records.CSV_COLUMNS)
    assert len(lines) == 1 + len(rec.estimates())
    assert lines[1].startswith(rec.run_id + ",triangular,0.5,pi1,4,0,")


def test_atomic_write_replaces_whole_file(tmp_path):
    path = tmp_path / "r.jsonl"
    atomic_write(str(path), "one\n")
    atomic_write(str(path), "two\n")
    assert path.read_text() == "two\n"
    assert os.listdir(tmp_path) == ["r.jsonl"]


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    path = tmp_path / "r.jsonl"
    path.write_text("old\n")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(records.os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(str(path), "new\n")
    assert path.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["r.jsonl"]
