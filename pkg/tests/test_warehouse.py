from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from qdss.errors import DuplicateError, ReferentialError, ValidationError
from qdss.model import (
    CasualtyRecord,
    Medic,
    Person,
    Province,
    QuakeEvent,
    Regency,
    Station,
)
from qdss.warehouse import FactFilter, Warehouse

UTC = timezone.utc


def small_wh() -> Warehouse:
    wh = Warehouse()
    wh.insert_station(Station("sta-1", "One", 5.5, 95.3))
    wh.insert_province(Province("prov-a", "A", 4.7, 96.7))
    wh.insert_province(Province("prov-b", "B", -6.2, 106.8))
    wh.insert_regency(Regency("reg-a1", "prov-a", "A1", 5.5, 95.3, 10_000))
    wh.insert_regency(Regency("reg-a2", "prov-a", "A2", 5.0, 96.0, 20_000))
    wh.insert_regency(Regency("reg-b1", "prov-b", "B1", -6.2, 106.8, 30_000))
    return wh


def quake(qid="q1", year=2004, mag=9.1, station="sta-1", lat=3.3, lon=95.8):
    return QuakeEvent(quake_id=qid, occurred_at=datetime(year, 12, 26, 0, 58, 53, tzinfo=UTC),
                      latitude=lat, longitude=lon, magnitude=mag, depth_km=30.0,
                      rupture_length_km=1300.0, affected_area_km2=170_000,
                      station_id=station)


class TestInsertQuake:
    def test_aceh_row_stored_and_retrievable(self):
        wh = small_wh()
        wh.insert_quake(quake())
        rows = wh.query_facts(FactFilter(start=datetime(2004, 1, 1, tzinfo=UTC),
                                         end=datetime(2004, 12, 31, tzinfo=UTC)))
        assert [r.quake_id for r in rows] == ["q1"]
        assert rows[0].magnitude == 9.1

    def test_magnitude_zero_rejected(self):
        wh = small_wh()
        with pytest.raises(ValidationError) as err:
            wh.insert_quake(quake(mag=0))
        assert "magnitude" in str(err.value)

    def test_duplicate_quake_id_rejected(self):
        wh = small_wh()
        wh.insert_quake(quake())
        with pytest.raises(DuplicateError):
            wh.insert_quake(quake())

    def test_unknown_station_rejected(self):
        wh = small_wh()
        with pytest.raises(ReferentialError):
            wh.insert_quake(quake(station="nope"))


class TestQueryFacts:
    def test_empty_store_returns_empty(self):
        assert small_wh().query_facts(FactFilter()) == []

    def test_vacuous_filter_returns_all(self):
        wh = small_wh()
        for i in range(5):
            wh.insert_quake(quake(qid=f"q{i}", year=2000 + i))
        assert len(wh.query_facts(FactFilter())) == 5

    def test_year_2004_returns_exactly_the_aceh_row(self, catalog_wh):
        # Oracle: linear scan over the catalog constants.
        from qdss.seed import CATALOG_QUAKES
        expected = sorted(q[0] for q in CATALOG_QUAKES if q[1].startswith("2004"))
        rows = catalog_wh.query_facts(FactFilter(
            start=datetime(2004, 1, 1, tzinfo=UTC),
            end=datetime(2004, 12, 31, 23, 59, 59, tzinfo=UTC)))
        assert [r.quake_id for r in rows] == expected == ["aceh-2004"]

    def test_inverted_range_rejected(self):
        with pytest.raises(ValidationError):
            small_wh().query_facts(FactFilter(start=datetime(2005, 1, 1, tzinfo=UTC),
                                              end=datetime(2004, 1, 1, tzinfo=UTC)))

    def test_deterministic_order(self):
        wh = small_wh()
        for qid in ["qc", "qa", "qb"]:
            wh.insert_quake(quake(qid=qid))
        assert [r.quake_id for r in wh.query_facts()] == ["qa", "qb", "qc"]

    def test_magnitude_band_filter(self):
        wh = small_wh()
        wh.insert_quake(quake(qid="small", mag=4.0))
        wh.insert_quake(quake(qid="big", mag=8.0))
        rows = wh.query_facts(FactFilter(min_magnitude=7.0, max_magnitude=9.0))
        assert [r.quake_id for r in rows] == ["big"]


class TestAffectedPopulation:
    def test_empty_set_is_zero(self):
        assert small_wh().affected_population(set()) == 0

    def test_singleton(self):
        wh = small_wh()
        wh.insert_regency(Regency("reg-x", "prov-a", "X", 5.1, 95.1, 52_000))
        assert wh.affected_population({"reg-x"}) == 52_000

    def test_three_regencies_sum(self):
        assert small_wh().affected_population({"reg-a1", "reg-a2", "reg-b1"}) == 60_000

    def test_unknown_regency(self):
        with pytest.raises(ReferentialError):
            small_wh().affected_population({"missing"})

    @given(st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_disjoint_additivity(self, pops):
        wh = Warehouse()
        wh.insert_province(Province("p", "P", 0, 0))
        ids = []
        for i, pop in enumerate(pops):
            rid = f"r{i}"
            wh.insert_regency(Regency(rid, "p", rid, 0, 0, pop))
            ids.append(rid)
        half = len(ids) // 2
        s1, s2 = set(ids[:half]), set(ids[half:])
        assert (wh.affected_population(s1) + wh.affected_population(s2)
                == wh.affected_population(s1 | s2))


def medic_fixture():
    wh = small_wh()
    for i, prov in enumerate(["prov-a"] * 40 + ["prov-b"] * 25):
        pid = f"p{i}"
        wh.insert_person(Person(pid, f"P{i}", "1980-01-01", "reg-a1", "alive"))
        wh.insert_medic(Medic(f"m{i}", pid, prov))
    return wh


class TestAvailableMedics:
    def test_no_medics(self):
        assert small_wh().available_medics({"reg-a1"}) == 0

    def test_affected_province_counts_all_its_medics(self):
        assert medic_fixture().available_medics({"reg-a1"}) == 40

    def test_split_provinces_only_affected_counted(self):
        # Oracle: filter medics by province then count.
        wh = medic_fixture()
        snap = wh.snapshot()
        expected = sum(1 for m in snap.medics.values() if m.home_province_id == "prov-b")
        assert wh.available_medics({"reg-b1"}) == expected == 25

    def test_one_medic_per_person(self):
        wh = small_wh()
        wh.insert_person(Person("p0", "P", "1980-01-01", "reg-a1", "alive"))
        wh.insert_medic(Medic("m0", "p0", "prov-a"))
        with pytest.raises(DuplicateError):
            wh.insert_medic(Medic("m1", "p0", "prov-a"))


class TestSnapshot:
    def test_snapshot_isolated_from_later_writes(self):
        wh = small_wh()
        snap = wh.snapshot()
        wh.insert_quake(quake())
        assert len(snap.quakes) == 0
        assert len(wh.snapshot().quakes) == 1

    def test_two_snapshots_without_writes_identical(self):
        wh = small_wh()
        wh.insert_quake(quake())
        a, b = wh.snapshot(), wh.snapshot()
        assert a.row_counts() == b.row_counts()
        assert a.quakes == b.quakes

    def test_empty_store_snapshot_all_zero(self):
        snap = Warehouse().snapshot()
        assert all(count == 0 for count in snap.row_counts().values())


class TestCasualtyConsistency:
    def test_recording_death_marks_person_dead(self):
        wh = medic_fixture()
        wh.insert_quake(quake())
        wh.insert_person(Person("victim", "V", "1990-05-05", "reg-a1", "alive"))
        wh.insert_casualty(CasualtyRecord("c1", "q1", "victim", "dead", "reg-a1", "m0",
                                          datetime(2004, 12, 27, tzinfo=UTC)))
        assert wh.snapshot().people["victim"].vital_status == "dead"

    def test_referential_closure_holds_on_catalog(self, catalog_wh):
        assert catalog_wh.snapshot().referential_closure_violations() == []

    def test_snowflake_shape_no_province_on_facts(self):
        fact_fields = set(QuakeEvent.__dataclass_fields__) | set(
            CasualtyRecord.__dataclass_fields__)
        assert "province_id" not in fact_fields
        assert "regency_id" in CasualtyRecord.__dataclass_fields__


class TestPersistence:
    def test_round_trip_preserves_query_results(self, tmp_path):
        wh = medic_fixture()
        for i in range(10):
            wh.insert_quake(quake(qid=f"q{i}", year=1995 + i, mag=5.0 + i * 0.3))
        wh.insert_casualty(CasualtyRecord("c1", "q0", None, "dead", "reg-a1", "m0",
                                          datetime(1996, 1, 1, tzinfo=UTC)))
        wh.save(tmp_path)
        loaded = Warehouse.load(tmp_path, attach=False)
        for flt in (FactFilter(),
                    FactFilter(min_magnitude=6.0),
                    FactFilter(start=datetime(1999, 1, 1, tzinfo=UTC),
                               end=datetime(2003, 1, 1, tzinfo=UTC))):
            assert wh.query_facts(flt) == loaded.query_facts(flt)
        assert loaded.snapshot().row_counts() == wh.snapshot().row_counts()

    def test_flush_appends_only_new_rows(self, tmp_path):
        wh = Warehouse(root=tmp_path)
        wh.insert_station(Station("sta-1", "One", 5.5, 95.3))
        wh.flush()
        wh.insert_station(Station("sta-2", "Two", 5.6, 95.4))
        wh.flush()
        lines = (tmp_path / "warehouse" / "stations.jsonl").read_text().strip().splitlines()
        assert len(lines) == 2
