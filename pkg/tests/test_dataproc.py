from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsuloc.channel import RssMeasurement
from rsuloc.dataproc import match_epochs, parse_record, read_log, write_epochs_csv
from rsuloc.errors import RecordParseError
from rsuloc.scenario import RoadConfig, deploy_rsus

RSUS = deploy_rsus(RoadConfig(segment_length=300.0))


def test_parse_sample_record():
    m = parse_record("00:16:EA:AE:3C:30, 7/10/2021 10:20:30, RSU_1, -68")
    assert m.mac == "00:16:EA:AE:3C:30"
    assert m.rsu_id == 1
    assert m.power == -68.0
    assert m.timestamp == 0.0


def test_parse_iso_and_bare_id():
    m = parse_record("aa, 2021-07-10T10:20:30.300000, 4, -50.5")
    assert m.rsu_id == 4
    assert m.timestamp == pytest.approx(0.3)


def test_parse_snaps_when_asked():
    m = parse_record("aa, 2021-07-10T10:20:30.149000, 4, -50.5", dt=0.1)
    assert m.timestamp == 0.1


def test_empty_line_rejected():
    with pytest.raises(RecordParseError):
        parse_record("   ", line_no=3)


@pytest.mark.parametrize(
    "line, field",
    [
        ("aa, 7/10/2021 10:20:30, RSU_1, abc", "power"),
        ("aa, yesterday, RSU_1, -60", "timestamp"),
        ("aa, 7/10/2021 10:20:30, AP_1, -60", "rsu"),
        (", 7/10/2021 10:20:30, RSU_1, -60", "mac"),
        ("aa, 7/10/2021 10:20:30, RSU_1, nan", "power"),
    ],
)
def test_bad_field_is_named(line, field):
    with pytest.raises(RecordParseError) as info:
        parse_record(line, line_no=7)
    assert info.value.field == field
    assert info.value.line_no == 7
    assert field in str(info.value)


def test_wrong_field_count():
    with pytest.raises(RecordParseError):
        parse_record("aa, 7/10/2021 10:20:30, RSU_1")


def test_read_log_skips_comments(tmp_path):
    path = tmp_path / "log.txt"
    path.write_text("# header\n\naa, 7/10/2021 10:20:30, RSU_1, -60\n", encoding="utf-8")
    assert len(read_log(path)) == 1


def _rec(mac, t, rsu, p=-50.0):
    return RssMeasurement(mac, t, rsu, p)


def test_three_records_one_epoch():
    epochs, diag = match_epochs([_rec("a", 0.0, i) for i in (3, 1, 2)], RSUS)
    assert len(epochs) == 1
    assert epochs[0].rsu_ids == [1, 2, 3]
    assert diag.dropped_groups == 0


def test_two_records_dropped():
    epochs, diag = match_epochs([_rec("a", 0.0, 1), _rec("a", 0.0, 2)], RSUS)
    assert epochs == []
    assert diag.dropped_groups == 1
    assert diag.dropped_records == 2


def test_two_vehicles_two_times():
    recs = [_rec(mac, t, i) for mac in ("a", "b") for t in (0.0, 0.1) for i in (1, 2, 3)]
    epochs, _ = match_epochs(recs, RSUS)
    assert len(epochs) == 4
    assert [(e.t, e.mac) for e in epochs] == [(0.0, "a"), (0.0, "b"), (0.1, "a"), (0.1, "b")]


def test_near_simultaneous_records_grouped():
    recs = [_rec("a", 0.98, 1), _rec("a", 1.02, 2), _rec("a", 1.0, 3)]
    epochs, _ = match_epochs(recs, RSUS)
    assert len(epochs) == 1 and epochs[0].t == 1.0


def test_duplicates_keep_last_and_unknown_counted():
    recs = [_rec("a", 0.0, 1, -60.0), _rec("a", 0.0, 1, -61.0), _rec("a", 0.0, 2), _rec("a", 0.0, 3), _rec("a", 0.0, 999)]
    epochs, diag = match_epochs(recs, RSUS)
    assert epochs[0].powers[0] == -61.0
    assert diag.duplicate_records == 1
    assert diag.unknown_rsu_records == 1


records_strategy = st.lists(
    st.tuples(
        st.sampled_from(["a", "b", "c"]),
        st.integers(0, 5),
        st.integers(1, 6),
        st.floats(-90.0, -20.0),
    ),
    max_size=60,
)


def _to_records(raw):
    return [RssMeasurement(mac, k * 0.1, rsu, p) for mac, k, rsu, p in raw]


@given(records_strategy, st.randoms())
@settings(max_examples=80, deadline=None)
def test_matching_is_permutation_invariant(raw, rnd):
    # distinct (mac, time, rsu) keys, so "keep last" is order independent
    raw = list({(m, k, r): (m, k, r, p) for m, k, r, p in raw}.values())
    recs = _to_records(raw)
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    a, _ = match_epochs(recs, RSUS)
    b, _ = match_epochs(shuffled, RSUS)
    assert a == b


@given(records_strategy)
@settings(max_examples=80, deadline=None)
def test_every_record_accounted_for(raw):
    recs = _to_records(raw)
    epochs, diag = match_epochs(recs, RSUS)
    used = sum(len(e) for e in epochs)
    assert used + diag.dropped_records + diag.duplicate_records + diag.unknown_rsu_records == len(recs)
    assert all(len(e) >= 3 for e in epochs)


def test_write_epochs_csv(tmp_path):
    epochs, _ = match_epochs([_rec("a", 0.0, i) for i in (1, 2, 3)], RSUS)
    path = tmp_path / "epochs.csv"
    write_epochs_csv(epochs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "mac,t,rsu_id,power"
    assert len(lines) == 4
    assert np.isclose(float(lines[1].split(",")[3]), -50.0)
