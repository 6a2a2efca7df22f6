import math
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from geoconform.datamodel import (CSV_HEADER, PREDICTORS, AqiBin, Dataset, Observation,
                                  RejectReason, Rejection, Subregion, aqi_bin, aqi_bins,
                                  audit_record, load_csv, save_csv)
from geoconform.errors import ContractError, DataError

from conftest import make_dataset


def raw_row(**over):
    row = {
        "location_id": "KE001", "country": "Kenya", "subregion": "east",
        "latitude": "-1.29", "longitude": "36.82", "timestamp": "2021-03-04T05:00:00Z",
        "pm25": "35.0",
    }
    row.update({p: "1.5" for p in PREDICTORS})
    row.update(over)
    return row


def write_rows(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in CSV_HEADER) + "\n")


# -- audit -------------------------------------------------------------------

def test_complete_row_accepted():
    obs = audit_record(raw_row())
    assert isinstance(obs, Observation)
    assert obs.pm25 == 35.0
    assert obs.subregion is Subregion.EAST
    assert obs.timestamp == datetime(2021, 3, 4, 5, tzinfo=timezone.utc)


@pytest.mark.parametrize("value", ["1200", "0", "1000", "-3", "inf"])
def test_pm25_out_of_range(value):
    rej = audit_record(raw_row(pm25=value))
    assert rej == Rejection(RejectReason.OUT_OF_RANGE, "pm25", rej.detail)


def test_empty_humidity_is_missing():
    rej = audit_record(raw_row(humidity=""))
    assert isinstance(rej, Rejection)
    assert rej.reason is RejectReason.MISSING_FIELD and rej.field == "humidity"


def test_nan_is_missing_and_garbage_unparseable():
    assert audit_record(raw_row(sat_aot="nan")).reason is RejectReason.MISSING_FIELD
    assert audit_record(raw_row(sat_aot="abc")).reason is RejectReason.UNPARSEABLE
    assert audit_record(raw_row(subregion="atlantis")).reason is RejectReason.UNPARSEABLE
    assert audit_record(raw_row(timestamp="yesterday")).reason is RejectReason.UNPARSEABLE


def test_coordinates_bounded():
    assert audit_record(raw_row(latitude="91")).reason is RejectReason.OUT_OF_RANGE
    assert audit_record(raw_row(longitude="-180.5")).reason is RejectReason.OUT_OF_RANGE


def test_country_is_not_critical_and_subregion_case_insensitive():
    obs = audit_record(raw_row(country="", subregion="  EAST "))
    assert isinstance(obs, Observation) and obs.country == ""


def test_audit_idempotent():
    obs = audit_record(raw_row())
    again = audit_record(obs.to_row())
    assert again == obs


# -- AQI bins ------------------------------------------------------------------

@pytest.mark.parametrize("value,expected", [
    (12.0, AqiBin.GOOD), (12.0001, AqiBin.MODERATE), (35.0, AqiBin.MODERATE),
    (35.5, AqiBin.USG), (55.0, AqiBin.USG), (150.0, AqiBin.UNHEALTHY),
    (250.0, AqiBin.VERY_UNHEALTHY), (250.01, AqiBin.HAZARDOUS), (10000.0, AqiBin.HAZARDOUS),
    (1e-9, AqiBin.GOOD),
])
def test_aqi_table(value, expected):
    assert aqi_bin(value) is expected


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_aqi_contract(bad):
    with pytest.raises(ContractError):
        aqi_bin(bad)


def test_aqi_bins_clip():
    with pytest.raises(ContractError):
        aqi_bins([-2.0, 5.0])
    assert aqi_bins([-2.0, 0.0, 40.0], clip_nonpositive=True).tolist() == [0, 0, 2]


@given(st.floats(min_value=1e-6, max_value=999.999), st.floats(min_value=1e-6, max_value=999.999))
def test_aqi_monotone(a, b):
    lo, hi = sorted((a, b))
    assert aqi_bin(lo) <= aqi_bin(hi)


@given(st.floats(min_value=1e-6, max_value=999.999, exclude_min=False))
def test_aqi_partition(x):
    edges = [0, 12, 35, 55, 150, 250, math.inf]
    matches = [i for i in range(6) if edges[i] < x <= edges[i + 1]]
    assert matches == [int(aqi_bin(x))]


# -- dataset & csv ---------------------------------------------------------------

def test_dataset_indices():
    ds = make_dataset([3, 2, 4])
    assert len(ds) == 9
    assert list(ds.by_location) == ["L000", "L001", "L002"]
    assert ds.by_location["L001"].tolist() == [3, 4]
    assert sum(len(v) for v in ds.by_subregion.values()) == 9
    assert ds[4].location_id == "L001"
    assert ds.take([0, 1]).location_id.tolist() == ["L000", "L000"]


def test_dataset_is_read_only():
    ds = make_dataset([2])
    with pytest.raises(ValueError):
        ds.pm25[0] = 1.0


def test_load_valid_and_rejects(tmp_path):
    rows = [raw_row(location_id=f"A{i}") for i in range(5)]
    rows[2]["pm25"] = "-3"
    p = tmp_path / "d.csv"
    write_rows(p, rows)
    ds, summary = load_csv(p)
    assert len(ds) == 4
    assert summary.accepted == 4
    assert summary.rejected == {"MissingField": 0, "OutOfRange": 1, "Unparseable": 0}
    assert ds.location_id.tolist() == ["A0", "A1", "A3", "A4"]


def test_load_ten_valid_rows(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [raw_row(location_id=f"A{i}") for i in range(10)])
    ds, summary = load_csv(p)
    assert len(ds) == 10 and summary.total_rejected == 0


def test_empty_file_with_header(tmp_path):
    p = tmp_path / "e.csv"
    write_rows(p, [])
    ds, summary = load_csv(p)
    assert len(ds) == 0 and summary.total_rejected == 0


def test_bad_header_and_short_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(DataError):
        load_csv(p)
    q = tmp_path / "short.csv"
    q.write_text(",".join(CSV_HEADER) + "\nX,Y,east\n")
    ds, summary = load_csv(q)
    assert len(ds) == 0 and summary.rejected["Unparseable"] == 1


def test_missing_file():
    with pytest.raises(OSError):
        load_csv("/nonexistent/file.csv")


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_round_trip(tmp_path_factory, seed):
    ds = make_dataset([2, 3, 1], seed=seed, years=(2019, 2020))
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    save_csv(ds, p)
    back, summary = load_csv(p)
    assert summary.total_rejected == 0
    assert back == ds


def test_equality_detects_changes():
    a = make_dataset([2, 2])
    b = make_dataset([2, 2], seed=1)
    assert a != b
    assert a == Dataset.from_observations(list(a))
