import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from qdss import feeds
from qdss.errors import NotFoundError, ParseError, ValidationError
from qdss.model import Alert, Regency

UTC = timezone.utc

WIRE = ('{"alert_id":"a1","issued_at":"2008-05-12T06:28:01Z","magnitude":7.9,'
        '"epicenter_lat":31.0,"epicenter_lon":103.3,"depth_km":19.0,'
        '"radius_km":120.0,"high_risk":true}')


class TestParseAlert:
    def test_well_formed_line(self):
        alert = feeds.parse_alert(WIRE)
        assert alert.magnitude == 7.9
        assert alert.alert_id == "a1"
        assert alert.high_risk is True

    def test_missing_epicenter_is_parse_error(self):
        data = json.loads(WIRE)
        del data["epicenter_lat"]
        with pytest.raises(ParseError) as err:
            feeds.parse_alert(json.dumps(data))
        assert "epicenter_lat" in str(err.value)

    def test_magnitude_out_of_range_names_field(self):
        data = json.loads(WIRE)
        data["magnitude"] = 11
        with pytest.raises(ValidationError) as err:
            feeds.parse_alert(json.dumps(data))
        assert "magnitude" in str(err.value)

    def test_malformed_json_carries_byte_offset(self):
        with pytest.raises(ParseError) as err:
            feeds.parse_alert('{"alert_id": !}')
        assert err.value.offset == 13  # the '!' byte

    @given(st.floats(min_value=0.1, max_value=10.0).map(lambda x: round(x, 1)),
           st.floats(min_value=-90, max_value=90).map(lambda x: round(x, 3)),
           st.floats(min_value=-180, max_value=180).map(lambda x: round(x, 3)),
           st.floats(min_value=0, max_value=700).map(lambda x: round(x, 1)),
           st.floats(min_value=0.1, max_value=1000).map(lambda x: round(x, 1)),
           st.booleans())
    @settings(max_examples=100, deadline=None)
    def test_serialize_parse_round_trip(self, mag, lat, lon, depth, radius, risk):
        alert = Alert("rt-1", datetime(2020, 5, 1, 12, 0, 0, tzinfo=UTC),
                      mag, lat, lon, depth, radius, risk)
        assert feeds.parse_alert(feeds.serialize_alert(alert)) == alert


class TestHighRisk:
    REGENCIES = [Regency("big-city", "p", "Big City", 0.0, 100.0, 2_000_000),
                 Regency("village", "p", "Village", 3.0, 100.0, 10_000)]

    def test_magnitude_alone_triggers(self):
        assert feeds.compute_high_risk(7.5, (0.0, 0.0), 10.0) is True

    def test_populated_regency_in_radius_triggers(self):
        assert feeds.compute_high_risk(5.0, (0.1, 100.0), 50.0, self.REGENCIES) is True

    def test_small_quake_far_from_cities_not_high_risk(self):
        assert feeds.compute_high_risk(5.0, (3.0, 100.0), 30.0, self.REGENCIES) is False


class TestGenerateScript:
    def test_same_seed_byte_identical(self):
        a = feeds.script_to_text(feeds.generate_script(10, 30, seed=42))
        b = feeds.script_to_text(feeds.generate_script(10, 30, seed=42))
        assert a == b

    def test_distinct_seeds_differ(self):
        a = feeds.script_to_text(feeds.generate_script(10, 30, seed=1))
        b = feeds.script_to_text(feeds.generate_script(10, 30, seed=2))
        assert a != b

    def test_days_zero_rejected(self):
        with pytest.raises(ValidationError):
            feeds.generate_script(10, 0, seed=1)

    def test_rate_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            feeds.generate_script(4.9, 10, seed=1)
        with pytest.raises(ValidationError):
            feeds.generate_script(30.1, 10, seed=1)

    def test_rate_8_mean_within_20_percent(self):
        script = feeds.generate_script(8, 30, seed=42)
        mean_per_day = len(script) / 30
        assert abs(mean_per_day - 8) <= 0.2 * 8

    def test_script_sorted_and_high_risk_minority(self):
        script = feeds.generate_script(20, 30, seed=7)
        times = [a.issued_at for a in script]
        assert times == sorted(times)
        high = sum(1 for a in script if a.high_risk)
        assert 0 < high < len(script) / 2

    def test_write_read_round_trip(self, tmp_path):
        script = feeds.generate_script(10, 5, seed=3)
        path = tmp_path / "alerts.jsonl"
        feeds.write_script(script, path)
        assert feeds.read_script(path) == script


class TestReplay:
    def test_empty_script_no_deliveries(self):
        seen = []
        assert feeds.replay([], 1000.0, seen.append) == 0
        assert seen == []

    def test_order_preserved_at_any_speedup(self):
        script = feeds.generate_script(10, 3, seed=11)
        for speedup in (1e6, 1e9):
            seen = []
            feeds.replay(script, speedup, seen.append, sleep=lambda _s: None)
            assert [a.alert_id for a in seen] == [a.alert_id for a in script]

    def test_nothing_dropped(self):
        script = feeds.generate_script(30, 10, seed=5)
        seen = []
        feeds.replay(script, 1e9, seen.append, sleep=lambda _s: None)
        assert len(seen) == len(script)

    def test_unsorted_script_rejected(self):
        script = feeds.generate_script(10, 3, seed=11)
        backwards = list(reversed(script))
        with pytest.raises(ValidationError):
            feeds.replay(backwards, 1e6, lambda _a: None)

    def test_sleep_scaled_by_speedup(self):
        # Frozen clock: each sleep target is the alert's scaled offset from start.
        script = feeds.generate_script(10, 2, seed=13)
        naps = []
        feeds.replay(script, 86400.0, lambda _a: None, sleep=naps.append,
                     clock=lambda: 0.0)
        span = (script[-1].issued_at - script[0].issued_at).total_seconds()
        assert naps[-1] == pytest.approx(span / 86400.0, rel=1e-6)
        assert naps == sorted(naps)


class TestRegistryFeeds:
    def test_demography_lookup_and_footer_sum(self, tmp_path):
        pops = {"reg-a": 1000, "reg-b": 2500, "reg-c": 40}
        feeds.write_demography(pops, tmp_path)
        feed = feeds.load_demography(tmp_path)
        assert feed.lookup("reg-b") == 2500
        assert sum(feed.lookup(r) for r in pops) == feed.national_population
        raw = (tmp_path / "feeds" / "demography.jsonl").read_text().strip().splitlines()
        footer = json.loads(raw[-1])
        assert footer["national_population"] == sum(pops.values())

    def test_unknown_regency_not_found(self, tmp_path):
        feeds.write_demography({"reg-a": 1}, tmp_path)
        with pytest.raises(NotFoundError):
            feeds.load_demography(tmp_path).lookup("nope")

    def test_health_lookup_and_footer(self, tmp_path):
        medics = {"prov-a": (40, 20), "prov-b": (120, 150)}
        feeds.write_health(medics, tmp_path)
        feed = feeds.load_health(tmp_path)
        assert feed.lookup("prov-a") == (40, 20)
        assert feed.national_medics == 160
        assert feed.national_deployable == 170
        with pytest.raises(NotFoundError):
            feed.lookup("prov-z")
