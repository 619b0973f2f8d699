"""Exit criteria. Each test is one criterion and prints one PASS/FAIL line."""

import itertools
import json
import random
import threading
import time
from datetime import datetime, timedelta, timezone

import pytest
import requests

from qdss import etl, feeds, gateway, olap, seed
from qdss.escalation import (
    IncidentEngine,
    IncidentState,
    Pledge,
    ProvinceCapacity,
    replay_audit,
)
from qdss.model import Alert, Station, Watermark
from qdss.olap import CubeSpec, Dimension, build_cube, drilldown, rollup, slice_cube
from qdss.planner import NeedsStandard, estimate_needs, medic_lack, medics_needed, predict_impact
from qdss.warehouse import Warehouse

from oracles import cube_oracle, knn_oracle
from test_planner import synthetic_history

UTC = timezone.utc


@pytest.mark.acceptance("formula-fidelity")
def test_formula_fidelity():
    """1000 random (A_c, N_mc, A_m) triples against a brute-force oracle."""
    rng = random.Random(424242)
    started = time.perf_counter()
    for _ in range(1000):
        a_c = rng.randint(0, 10_000_000)
        n_mc = rng.randint(1, 100_000)
        a_m = rng.randint(0, 100_000)
        # Brute-force oracle: teams needed is A_c / N_mc rounded up, lack is
        # the positive part of needed minus available.
        oracle_m_n = (a_c + n_mc - 1) // n_mc
        oracle_m_l = oracle_m_n - a_m if oracle_m_n > a_m else 0
        assert medics_needed(a_c, n_mc) == oracle_m_n
        assert medic_lack(oracle_m_n, a_m) == oracle_m_l
    assert time.perf_counter() - started < 1.0


@pytest.mark.acceptance("seed-data-fidelity")
def test_seed_data_fidelity(catalog_wh):
    """Three historical quakes stored; the 2004 slice is exactly the Aceh event."""
    snap = catalog_wh.snapshot()
    stored = {q.quake_id: q for q in snap.quakes.values()}
    assert stored["aceh-2004"].magnitude == 9.1
    assert stored["aceh-2004"].occurred_at.date().isoformat() == "2004-12-26"
    assert stored["sichuan-2008"].magnitude == 7.9
    assert stored["sichuan-2008"].occurred_at.date().isoformat() == "2008-05-12"
    assert stored["tangshan-1976"].magnitude == 7.5
    assert stored["tangshan-1976"].occurred_at.date().isoformat() == "1976-07-27"

    cube = build_cube(snap, CubeSpec(("deaths", "quake_count"),
                                     (Dimension("time", "year"),
                                      Dimension("geography", "province"))))
    aceh_2004 = slice_cube(cube, "time", "2004")
    assert aceh_2004.grand_total["deaths"] == 230_000
    assert aceh_2004.grand_total["quake_count"] == 1
    indonesian = {p for (p,) in aceh_2004.cells} - {"intl"}
    domestic = sum(aceh_2004.cells[(p,)]["deaths"] for p in indonesian)
    assert domestic == 168_000
    sichuan_2008 = slice_cube(cube, "time", "2008")
    assert sichuan_2008.cells[("intl",)]["deaths"] == 40_000


def _two_dimension_specs():
    axes = {
        "geography": [Dimension("geography", "province"), Dimension("geography", "regency")],
        "time": [Dimension("time", "year"), Dimension("time", "month"),
                 Dimension("time", "day")],
        "magnitude_band": [Dimension("magnitude_band", width=1.0)],
    }
    for a, b in itertools.combinations(axes, 2):
        for dim_a in axes[a]:
            for dim_b in axes[b]:
                yield CubeSpec(olap.MEASURES, (dim_a, dim_b))


@pytest.mark.acceptance("olap-oracle-equivalence")
def test_olap_oracle_equivalence(corpus_wh):
    """Every 2-dimension cube over 503 facts equals the independent group-by
    oracle cell-for-cell; roll-up of a drill-down is the identity."""
    snap = corpus_wh.snapshot()
    snap.casualty_counts()  # prime shared caches outside the timed window
    snap.home_regency(next(iter(snap.quakes)))
    specs = list(_two_dimension_specs())
    assert len(specs) == 11
    started = time.perf_counter()
    for spec in specs:
        cube = build_cube(snap, spec)
        cells, grand = cube_oracle(snap, spec)
        assert cube.cells == cells
        assert cube.grand_total == grand
        for dim in spec.dimensions:
            finer_exists = (dim.name, dim.level) in {("geography", "province"),
                                                     ("time", "year"), ("time", "month")}
            if finer_exists:
                assert rollup(drilldown(cube, dim.name), dim.name).cells == cube.cells
    assert time.perf_counter() - started < 5.0


@pytest.mark.acceptance("etl-idempotence")
def test_etl_idempotence(tmp_path):
    wh = Warehouse()
    wh.insert_station(Station("sta-1", "One", 5.5, 95.3))
    path = tmp_path / "stream.jsonl"
    path.write_text("")
    source = etl.SourceSpec("stream", str(path), "quake")
    t0 = datetime(2008, 1, 1, tzinfo=UTC)

    def append(i):
        payload = {"quake_id": f"q{i}",
                   "occurred_at": (t0 + timedelta(hours=i)).strftime("%Y-%m-%dT%H:%M:%SZ"),
                   "latitude": 0.0, "longitude": 100.0, "magnitude": 5.0,
                   "depth_km": 10.0, "rupture_length_km": 1.0,
                   "affected_area_km2": 10, "station_id": "sta-1"}
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload) + "\n")

    for i in range(5):
        append(i)
    assert etl.run_etl(wh, [source])[0].inserted == 5
    assert etl.run_etl(wh, [source])[0].inserted == 0  # immediate re-run
    append(5)
    assert etl.run_etl(wh, [source])[0].inserted == 1  # exactly the new record

    rng = random.Random(20080512)
    low = datetime(1970, 1, 1, tzinfo=UTC)
    appended, inserted = 6, 6
    for _ in range(100):
        if rng.random() < 0.5:
            append(appended)
            appended += 1
        else:
            inserted += etl.run_etl(wh, [source])[0].inserted
            mark = wh.watermark("stream")
            assert mark is not None and mark.last_extracted_at >= low
            low = mark.last_extracted_at
    inserted += etl.run_etl(wh, [source])[0].inserted
    assert inserted == appended == len(wh.snapshot().quakes)


ESCALATION_EVENTS = ("assess", "approve-sos1", "pledge-20", "pledge-60",
                     "close-sos1", "approve-sos2")
MODEL_CAPACITIES = [ProvinceCapacity("prov-x", 1000)]
MODEL_CENTROIDS = {"prov-x": (1.0, 96.0)}


def _model_alert(n):
    return Alert(alert_id=f"mc-{n}", issued_at=datetime(2020, 1, 1, tzinfo=UTC),
                 magnitude=7.0, epicenter_lat=0.0, epicenter_lon=95.0,
                 depth_km=10.0, radius_km=50.0, high_risk=True)


def _apply_event(engine, incident, event, residual_scenario):
    if event == "assess":
        a_c = residual_scenario * 1000
        engine.apply_assessment(
            incident, estimate_needs(a_c, 0, NeedsStandard(citizens_per_medic=1000)), None)
    elif event == "approve-sos1":
        engine.request_sos1(incident, MODEL_CAPACITIES, MODEL_CENTROIDS, approved_by="op")
    elif event.startswith("pledge-"):
        amount = int(event.split("-")[1])
        stage = 1 if incident.state is IncidentState.SOS1_DISPATCHED else 2
        origin = "prov-x" if stage == 1 else "intl-org"
        engine.record_pledge(incident, Pledge(
            pledge_id=f"p{len(incident.pledges)}", incident_id=incident.incident_id,
            origin=origin, medics_pledged=amount, stage=stage,
            pledged_at=datetime(2020, 1, 2, tzinfo=UTC)))
    elif event == "close-sos1":
        engine.close_sos1(incident)
    elif event == "approve-sos2":
        engine.request_sos2(incident, approved_by="op")


def _signature(incident):
    return (incident.state, incident.residual_lack, len(incident.pledges),
            len(incident.audit_log))


@pytest.mark.acceptance("escalation-model-check")
def test_escalation_model_check():
    """Every event sequence of length <= 6, per residual scenario.

    The full 6^6 trees are walked with shared prefixes; a rejected event must
    leave the incident untouched (asserted) and the sequence continues, so
    this is the literal enumeration of all sequences over the alphabet.
    """
    started = time.perf_counter()
    engine = IncidentEngine(province_ids={"prov-x"})
    counter = itertools.count()
    nodes = 0

    def explore(incident, depth, residual, sos1_closed_short):
        nonlocal nodes
        nodes += 1
        if incident.state is IncidentState.SOS2_DISPATCHED:
            assert sos1_closed_short, "SOS2 reached without a short SOS1 closure"
        if incident.state is IncidentState.RESOLVED:
            assert incident.residual_lack == 0
        if depth == 0:
            return
        for event in ESCALATION_EVENTS:
            branch = incident.clone()
            before = _signature(branch)
            flag = sos1_closed_short
            try:
                was_dispatched = branch.state is IncidentState.SOS1_DISPATCHED
                _apply_event(engine, branch, event, residual)
                if (event == "close-sos1" and was_dispatched
                        and branch.residual_lack > 0):
                    flag = True
            except Exception:
                assert _signature(branch) == before, f"{event} mutated on rejection"
            explore(branch, depth - 1, residual, flag)

    for residual in (0, 20, 60):
        root = engine.open_incident(_model_alert(next(counter)))
        explore(root, 6, residual, False)
    # One node per sequence prefix: 3 scenarios x sum of 6^d for d in 0..6.
    assert nodes == 3 * sum(6 ** d for d in range(7))
    assert time.perf_counter() - started < 10.0


@pytest.mark.acceptance("knn-oracle")
@pytest.mark.parametrize("k", [1, 3, 5])
def test_knn_oracle(k):
    history = synthetic_history(100, seed=8128)
    query = (7.6, 33.0, 1_250_000)
    ids, _dists, weights, deaths, injured = knn_oracle(query, history, k)
    got = predict_impact(*query, history, k=k)
    assert [n.quake_id for n in got.neighbors] == ids
    for neighbor, weight in zip(got.neighbors, weights):
        assert abs(neighbor.weight - weight) <= 1e-9
    assert got.predicted_deaths == pytest.approx(deaths, rel=1e-9)
    assert got.predicted_injured == pytest.approx(injured, rel=1e-9)


@pytest.mark.acceptance("simulator-rate")
def test_simulator_rate():
    for rate, rng_seed in ((5, 101), (10, 202), (30, 303)):
        script = feeds.generate_script(rate, 30, seed=rng_seed)
        mean = len(script) / 30
        assert abs(mean - rate) <= 0.2 * rate, f"rate {rate}: got {mean}/day"
        again = feeds.generate_script(rate, 30, seed=rng_seed)
        assert feeds.script_to_text(script) == feeds.script_to_text(again)


@pytest.mark.acceptance("end-to-end-scenario")
def test_end_to_end_scenario(tmp_path):
    """One replayed high-risk alert walks Received -> ... -> Resolved through
    gateway calls only, and the audit log replays to the same state."""
    root = seed.write_demo_data(tmp_path / "data", synthetic=40, seed=13,
                                catalog_casualties=False)
    server, _app = gateway.serve(root, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    auth = {"Authorization": "Bearer operator-token"}

    try:
        # The demography/health feeds are the wiring source for the planner's
        # population and medic numbers; check the seams agree before driving.
        demography = feeds.load_demography(root)
        wh = Warehouse.load(root, attach=False)
        for regency_id, population in demography.populations.items():
            assert wh.snapshot().regencies[regency_id].population == population
        health = feeds.load_health(root)

        alert = Alert(alert_id="e2e-1", issued_at=datetime(2026, 3, 5, 6, 0, 0, tzinfo=UTC),
                      magnitude=8.6, epicenter_lat=5.4, epicenter_lon=95.4,
                      depth_km=22.0, radius_km=150.0, high_risk=True)
        statuses = []
        feeds.replay([alert], speedup=1e9, deliver=lambda a: statuses.append(
            requests.post(f"{base}/alerts", json=json.loads(feeds.serialize_alert(a)),
                          headers=auth).status_code))
        assert statuses == [201]

        incident_id = "inc-e2e-1"
        detail = requests.get(f"{base}/incidents/{incident_id}").json()
        seen_states = [detail["state"]]
        assert detail["state"] == "Received"
        assert detail["alert"]["high_risk"] is True

        detail = requests.post(f"{base}/incidents/{incident_id}/assess",
                               json={}, headers=auth).json()
        seen_states.append(detail["state"])
        residual = detail["residual_lack"]
        assert detail["state"] == "Assessed" and residual > 0

        detail = requests.post(f"{base}/incidents/{incident_id}/approve-sos1",
                               json={"actor": "duty-chief"}, headers=auth).json()
        seen_states.append(detail["state"])
        assert detail["state"] == "SOS1Dispatched"
        plan = detail["dispatch_plan"]
        assert plan and sum(p["medics_requested"] for p in plan) == residual
        for request_line in plan:
            if request_line["origin"] != "national":
                deployable = health.lookup(request_line["origin"])[1]
                assert request_line["medics_requested"] <= deployable

        first_origin = plan[0]["origin"]
        pledged = plan[0]["medics_requested"] // 2 or 1
        requests.post(f"{base}/incidents/{incident_id}/pledge",
                      json={"origin": first_origin, "medics": pledged}, headers=auth)
        detail = requests.post(f"{base}/incidents/{incident_id}/close-sos1",
                               json={}, headers=auth).json()
        seen_states.append(detail["state"])
        assert detail["state"] == "AwaitingSOS2Approval"

        detail = requests.post(f"{base}/incidents/{incident_id}/approve-sos2",
                               json={"actor": "duty-chief"}, headers=auth).json()
        seen_states.append(detail["state"])
        assert detail["state"] == "SOS2Dispatched"

        remaining = detail["residual_lack"]
        detail = requests.post(f"{base}/incidents/{incident_id}/pledge",
                               json={"origin": "world-health-corps",
                                     "medics": remaining}, headers=auth).json()
        seen_states.append(detail["state"])
        assert detail["state"] == "Resolved"
        assert detail["residual_lack"] == 0
        assert seen_states == ["Received", "Assessed", "SOS1Dispatched",
                               "AwaitingSOS2Approval", "SOS2Dispatched", "Resolved"]

        # Replay the served audit log and the on-disk copy; both reproduce the state.
        final = requests.get(f"{base}/incidents/{incident_id}").json()
        replayed = replay_audit(final["audit_log"])
        assert replayed.state is IncidentState.RESOLVED
        assert replayed.residual_lack == 0
        assert len(replayed.pledges) == 2
        log_path = root / "incidents" / f"{incident_id}.log.jsonl"
        disk_entries = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert replay_audit(disk_entries).state is IncidentState.RESOLVED
    finally:
        server.shutdown()
