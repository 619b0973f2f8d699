from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from qdss.errors import ParseError, ValidationError
from qdss.model import (
    Alert,
    QuakeEvent,
    format_ts,
    parse_ts,
    row_from_json,
    row_to_json,
)


def make_quake(**overrides):
    base = dict(quake_id="q1", occurred_at=datetime(2004, 12, 26, tzinfo=timezone.utc),
                latitude=3.3, longitude=95.8, magnitude=9.1, depth_km=30.0,
                rupture_length_km=1300.0, affected_area_km2=170000.0,
                station_id="sta-1")
    base.update(overrides)
    return QuakeEvent(**base)


def test_valid_quake_passes():
    make_quake().validate()


@pytest.mark.parametrize("field,value", [
    ("magnitude", 0),        # open lower bound
    ("magnitude", 10.5),
    ("latitude", -91),
    ("longitude", 181),
    ("depth_km", -1),
    ("rupture_length_km", -0.1),
    ("affected_area_km2", -5),
])
def test_out_of_range_field_names_field(field, value):
    with pytest.raises(ValidationError) as err:
        make_quake(**{field: value}).validate()
    assert field in str(err.value)


def test_parse_ts_z_suffix_and_offset_agree():
    assert parse_ts("2004-12-26T00:58:53Z") == parse_ts("2004-12-26T00:58:53+00:00")


def test_parse_ts_rejects_naive():
    with pytest.raises(ValidationError):
        parse_ts("2004-12-26T00:58:53")


def test_format_ts_second_precision():
    ts = datetime(2004, 12, 26, 0, 58, 53, 123456, tzinfo=timezone.utc)
    assert format_ts(ts) == "2004-12-26T00:58:53Z"


def test_row_json_round_trip():
    quake = make_quake()
    assert row_from_json(QuakeEvent, row_to_json(quake)) == quake


def test_row_from_json_missing_field():
    with pytest.raises(ValidationError) as err:
        row_from_json(QuakeEvent, '{"quake_id": "q1"}')
    assert "missing" in str(err.value)


def test_row_from_json_bad_json_carries_offset():
    with pytest.raises(ParseError) as err:
        row_from_json(QuakeEvent, '{"quake_id": }')
    assert err.value.offset is not None


@given(st.floats(min_value=0.1, max_value=10.0),
       st.floats(min_value=-90, max_value=90),
       st.floats(min_value=-180, max_value=180),
       st.floats(min_value=0, max_value=700),
       st.floats(min_value=0.1, max_value=1000),
       st.booleans(),
       st.datetimes(min_value=datetime(1970, 1, 2), max_value=datetime(2100, 1, 1)))
def test_alert_round_trip(mag, lat, lon, depth, radius, risk, issued):
    alert = Alert(alert_id="a1", issued_at=issued.replace(tzinfo=timezone.utc, microsecond=0),
                  magnitude=mag, epicenter_lat=lat, epicenter_lon=lon,
                  depth_km=depth, radius_km=radius, high_risk=risk)
    assert row_from_json(Alert, row_to_json(alert)) == alert
