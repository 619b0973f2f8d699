"""Seed data: the historical quake catalog plus a synthetic corpus generator.

The catalog carries three well-known events with their recorded death tolls:

    Aceh     2004-12-26  M9.1  230,000 dead across the Indian Ocean rim,
                               168,000 of them in Indonesia
    Sichuan  2008-05-12  M7.9   40,000 dead
    Tangshan 1976-07-27  M7.5   no per-event toll carried here

Casualties are one row per victim, attributed to the regency where they were
recorded; non-Indonesian tolls sit under the "intl" province so the geography
dimension still adds up. Synthetic quakes avoid the year 2004, which keeps
2004 aggregates equal to the Aceh event alone at any corpus size.
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

from . import feeds
from .escalation import ProvinceCapacity
from .model import (
    BuildingDamage,
    CasualtyRecord,
    Medic,
    Person,
    Province,
    QuakeEvent,
    Regency,
    Station,
)
from .planner import NeedsStandard, save_standards
from .warehouse import Warehouse, data_root

ACEH_DEATHS_TOTAL = 230_000
ACEH_DEATHS_INDONESIA = 168_000
SICHUAN_DEATHS = 40_000

PROVINCES = [
    ("aceh", "Aceh", 4.7, 96.7),
    ("north-sumatra", "North Sumatra", 2.1, 99.1),
    ("west-sumatra", "West Sumatra", -0.9, 100.4),
    ("bengkulu", "Bengkulu", -3.8, 102.3),
    ("lampung", "Lampung", -4.9, 105.0),
    ("banten", "Banten", -6.4, 106.1),
    ("jakarta", "Jakarta", -6.2, 106.8),
    ("west-java", "West Java", -6.9, 107.6),
    ("central-java", "Central Java", -7.3, 110.0),
    ("yogyakarta", "Yogyakarta", -7.9, 110.4),
    ("east-java", "East Java", -7.5, 112.5),
    ("bali", "Bali", -8.4, 115.2),
    ("intl", "International", 10.0, 95.0),
]

REGENCIES = [
    # (regency_id, province_id, name, lat, lon, population)
    ("banda-aceh", "aceh", "Banda Aceh", 5.55, 95.32, 260_000),
    ("aceh-besar", "aceh", "Aceh Besar", 5.38, 95.52, 360_000),
    ("west-aceh", "aceh", "West Aceh", 4.45, 96.15, 190_000),
    ("north-aceh", "aceh", "North Aceh", 5.07, 97.13, 540_000),
    ("medan", "north-sumatra", "Medan", 3.59, 98.67, 2_100_000),
    ("nias", "north-sumatra", "Nias", 1.10, 97.60, 130_000),
    ("deli-serdang", "north-sumatra", "Deli Serdang", 3.42, 98.87, 1_800_000),
    ("padang", "west-sumatra", "Padang", -0.95, 100.35, 830_000),
    ("mentawai", "west-sumatra", "Mentawai Islands", -2.20, 99.60, 86_000),
    ("pariaman", "west-sumatra", "Pariaman", -0.62, 100.12, 84_000),
    ("bengkulu-city", "bengkulu", "Bengkulu City", -3.80, 102.26, 310_000),
    ("mukomuko", "bengkulu", "Mukomuko", -2.58, 101.12, 155_000),
    ("bandar-lampung", "lampung", "Bandar Lampung", -5.43, 105.26, 880_000),
    ("west-lampung", "lampung", "West Lampung", -5.15, 104.40, 290_000),
    ("serang", "banten", "Serang", -6.11, 106.15, 610_000),
    ("pandeglang", "banten", "Pandeglang", -6.75, 105.69, 1_100_000),
    ("central-jakarta", "jakarta", "Central Jakarta", -6.18, 106.83, 900_000),
    ("south-jakarta", "jakarta", "South Jakarta", -6.28, 106.80, 2_050_000),
    ("bandung", "west-java", "Bandung", -6.91, 107.61, 2_400_000),
    ("sukabumi", "west-java", "Sukabumi", -6.92, 106.93, 2_380_000),
    ("garut", "west-java", "Garut", -7.20, 107.90, 2_500_000),
    ("semarang", "central-java", "Semarang", -6.99, 110.42, 1_650_000),
    ("cilacap", "central-java", "Cilacap", -7.72, 109.01, 1_680_000),
    ("yogyakarta-city", "yogyakarta", "Yogyakarta City", -7.80, 110.36, 410_000),
    ("bantul", "yogyakarta", "Bantul", -7.89, 110.33, 910_000),
    ("surabaya", "east-java", "Surabaya", -7.25, 112.75, 2_800_000),
    ("malang", "east-java", "Malang", -7.98, 112.63, 860_000),
    ("denpasar", "bali", "Denpasar", -8.65, 115.22, 650_000),
    ("buleleng", "bali", "Buleleng", -8.12, 115.09, 640_000),
    ("sichuan-cn", "intl", "Sichuan (CN)", 31.00, 103.00, 8_000_000),
    ("tangshan-cn", "intl", "Tangshan (CN)", 39.63, 118.18, 7_000_000),
    ("indian-ocean-rim", "intl", "Indian Ocean rim", 7.00, 80.00, 5_000_000),
]

STATIONS = [
    ("sta-banda-aceh", "Banda Aceh Geophysics Station", 5.55, 95.32),
    ("sta-medan", "Medan Geophysics Station", 3.59, 98.67),
    ("sta-padang", "Padang Geophysics Station", -0.95, 100.35),
    ("sta-jakarta", "Jakarta Geophysics Station", -6.18, 106.83),
    ("sta-denpasar", "Denpasar Geophysics Station", -8.65, 115.22),
    ("sta-global", "Global Seismic Network", 25.00, 110.00),
]

CATALOG_QUAKES = [
    # (quake_id, occurred_at, lat, lon, magnitude, depth_km, rupture_km, area_km2, station)
    ("aceh-2004", "2004-12-26T00:58:53Z", 3.316, 95.854, 9.1, 30.0, 1300.0, 170_000, "sta-banda-aceh"),
    ("sichuan-2008", "2008-05-12T06:28:01Z", 31.002, 103.322, 7.9, 19.0, 240.0, 90_000, "sta-global"),
    ("tangshan-1976", "1976-07-27T19:42:53Z", 39.630, 118.180, 7.5, 12.0, 70.0, 30_000, "sta-global"),
]

# Death tolls per (quake, regency); Aceh splits 168k domestic / 62k abroad.
CATALOG_DEATHS = {
    "aceh-2004": {
        "banda-aceh": 61_000,
        "aceh-besar": 55_000,
        "west-aceh": 30_000,
        "north-aceh": 22_000,
        "indian-ocean-rim": 62_000,
    },
    "sichuan-2008": {"sichuan-cn": SICHUAN_DEATHS},
}

# Medic rows per province (mirrors the national health registry feed).
MEDICS_PER_PROVINCE = {
    "aceh": 40,
    "north-sumatra": 120,
    "west-sumatra": 80,
    "bengkulu": 30,
    "lampung": 50,
    "banten": 60,
    "jakarta": 400,
    "west-java": 250,
    "central-java": 200,
    "yogyakarta": 90,
    "east-java": 260,
    "bali": 70,
    "intl": 10,
}

# Teams each province can send out when a disaster hits elsewhere.
DEPLOYABLE_PER_PROVINCE = {
    "aceh": 20,
    "north-sumatra": 150,
    "west-sumatra": 100,
    "bengkulu": 30,
    "lampung": 60,
    "banten": 70,
    "jakarta": 300,
    "west-java": 200,
    "central-java": 150,
    "yogyakarta": 60,
    "east-java": 180,
    "bali": 50,
}

DEFAULT_TOKENS = {"operator-token": "operate", "viewer-token": "read"}


def load_dimensions(wh: Warehouse) -> None:
    for station_id, name, lat, lon in STATIONS:
        wh.insert_station(Station(station_id, name, lat, lon))
    for province_id, name, lat, lon in PROVINCES:
        wh.insert_province(Province(province_id, name, lat, lon))
    for regency_id, province_id, name, lat, lon, population in REGENCIES:
        wh.insert_regency(Regency(regency_id, province_id, name, lat, lon, population))


def load_medics(wh: Warehouse) -> None:
    regencies_by_province: dict[str, list[str]] = {}
    for regency_id, province_id, *_ in REGENCIES:
        regencies_by_province.setdefault(province_id, []).append(regency_id)
    for province_id, count in MEDICS_PER_PROVINCE.items():
        homes = regencies_by_province[province_id]
        for i in range(count):
            person_id = f"p-{province_id}-{i:04d}"
            wh.insert_person(Person(person_id=person_id,
                                    name=f"Medic {province_id} {i}",
                                    birth_date="1970-01-01",
                                    residence_regency_id=homes[i % len(homes)],
                                    vital_status="alive"))
            wh.insert_medic(Medic(medic_id=f"m-{province_id}-{i:04d}",
                                  person_id=person_id,
                                  home_province_id=province_id))


def _medic_cycle(wh: Warehouse) -> list[str]:
    return sorted(wh.snapshot().medics)


def load_catalog(wh: Warehouse, casualties: bool = True) -> None:
    """Insert the three historical quakes and their per-victim casualty rows."""
    for quake_id, occurred_at, lat, lon, mag, depth, rupture, area, station in CATALOG_QUAKES:
        wh.insert_quake(QuakeEvent(
            quake_id=quake_id,
            occurred_at=datetime.strptime(occurred_at, "%Y-%m-%dT%H:%M:%SZ").replace(
                tzinfo=timezone.utc),
            latitude=lat, longitude=lon, magnitude=mag, depth_km=depth,
            rupture_length_km=rupture, affected_area_km2=area, station_id=station))
    if not casualties:
        return
    medics = _medic_cycle(wh)
    for quake_id, tolls in CATALOG_DEATHS.items():
        occurred = next(q for q in CATALOG_QUAKES if q[0] == quake_id)[1]
        base_ts = datetime.strptime(occurred, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
        n = 0
        for regency_id, toll in tolls.items():
            for _ in range(toll):
                wh.insert_casualty(CasualtyRecord(
                    record_id=f"c-{quake_id}-{n:06d}",
                    quake_id=quake_id,
                    person_id=None,
                    kind="dead",
                    regency_id=regency_id,
                    medic_id=medics[n % len(medics)],
                    recorded_at=base_ts + timedelta(days=1 + n % 30)))
                n += 1


def load_synthetic(wh: Warehouse, count: int, seed: int = 7) -> None:
    """Add deterministic synthetic quakes with casualties and building damage.

    Years 1990-2008 except 2004; epicenters jittered around regency centroids.
    Areas are whole square kilometers so partition sums stay exact.
    """
    rng = random.Random(seed)
    years = [y for y in range(1990, 2009) if y != 2004]
    indonesian = [r for r in REGENCIES if r[1] != "intl"]
    stations = [s[0] for s in STATIONS]
    medics = _medic_cycle(wh)
    categories = ("house", "office", "school", "hospital", "public_place", "infrastructure")
    severities = ("light", "moderate", "destroyed")
    for i in range(count):
        regency_id, _prov, _name, lat, lon, _pop = rng.choice(indonesian)
        year = rng.choice(years)
        occurred = datetime(year, rng.randint(1, 12), rng.randint(1, 28),
                            rng.randint(0, 23), rng.randint(0, 59), rng.randint(0, 59),
                            tzinfo=timezone.utc)
        magnitude = round(rng.uniform(3.0, 8.5), 1)
        quake_id = f"syn-{seed}-{i:04d}"
        wh.insert_quake(QuakeEvent(
            quake_id=quake_id, occurred_at=occurred,
            latitude=round(lat + rng.uniform(-0.5, 0.5), 3),
            longitude=round(lon + rng.uniform(-0.5, 0.5), 3),
            magnitude=magnitude,
            depth_km=round(rng.uniform(5.0, 250.0), 1),
            rupture_length_km=round(rng.uniform(1.0, 300.0), 1),
            affected_area_km2=rng.randint(50, 120_000),
            station_id=rng.choice(stations)))
        deaths = rng.randint(0, 150) if magnitude >= 6.0 else rng.randint(0, 4)
        injured = rng.randint(0, 300) if magnitude >= 6.0 else rng.randint(0, 10)
        for n in range(deaths + injured):
            wh.insert_casualty(CasualtyRecord(
                record_id=f"c-{quake_id}-{n:05d}",
                quake_id=quake_id,
                person_id=None,
                kind="dead" if n < deaths else "injured",
                regency_id=regency_id,
                medic_id=medics[rng.randrange(len(medics))],
                recorded_at=occurred + timedelta(days=rng.randint(1, 20))))
        if magnitude >= 5.5:
            for j, category in enumerate(rng.sample(categories, rng.randint(1, 3))):
                wh.insert_damage(BuildingDamage(
                    damage_id=f"d-{quake_id}-{j}",
                    quake_id=quake_id,
                    regency_id=regency_id,
                    category=category,
                    damaged_count=rng.randint(1, 500),
                    severity=rng.choice(severities)))


def build_catalog_warehouse(synthetic: int = 0, seed: int = 7,
                            catalog_casualties: bool = True) -> Warehouse:
    """In-memory warehouse: dimensions, medics, catalog, optional synthetics."""
    wh = Warehouse()
    load_dimensions(wh)
    load_medics(wh)
    load_catalog(wh, casualties=catalog_casualties)
    if synthetic:
        load_synthetic(wh, synthetic, seed)
    return wh


def write_demo_data(root: str | Path | None = None, synthetic: int = 50,
                    seed: int = 7, port: int = 8642,
                    catalog_casualties: bool = True) -> Path:
    """Materialize a complete data directory: warehouse, feeds, capacities,
    standards, gateway config and an ETL source registry over staging files."""
    base = data_root(root)
    base.mkdir(parents=True, exist_ok=True)

    wh = build_catalog_warehouse(synthetic=synthetic, seed=seed,
                                 catalog_casualties=catalog_casualties)
    wh.save(base)

    feeds.write_demography({r[0]: r[5] for r in REGENCIES if r[1] != "intl"}, base)
    feeds.write_health({p: (MEDICS_PER_PROVINCE[p], DEPLOYABLE_PER_PROVINCE[p])
                        for p in DEPLOYABLE_PER_PROVINCE}, base)

    with open(base / "capacities.jsonl", "w", encoding="utf-8") as fh:
        for province_id in sorted(DEPLOYABLE_PER_PROVINCE):
            fh.write(json.dumps({"province_id": province_id,
                                 "medics_deployable": DEPLOYABLE_PER_PROVINCE[province_id]},
                                sort_keys=True) + "\n")

    save_standards(NeedsStandard(), base)

    config = {
        "port": port,
        "tokens": dict(DEFAULT_TOKENS),
        "thresholds": {
            "high_risk_magnitude": feeds.DEFAULT_HIGH_RISK_MAGNITUDE,
            "high_risk_population": feeds.DEFAULT_HIGH_RISK_POPULATION,
        },
    }
    with open(base / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")

    staging = base / "staging"
    staging.mkdir(parents=True, exist_ok=True)
    sources = []
    for table, kind in (("quakes", "quake"), ("casualties", "casualty"), ("damage", "damage")):
        path = staging / f"{table}.jsonl"
        path.touch()
        sources.append({"source_id": f"staging-{table}", "path": f"staging/{table}.jsonl",
                        "record_kind": kind})
    with open(base / "sources.jsonl", "w", encoding="utf-8") as fh:
        for source in sources:
            fh.write(json.dumps(source, sort_keys=True) + "\n")
    return base
