"""The two logical stores: the snowflake warehouse and the transactional staging area.

The warehouse keeps fact tables (quakes, casualties, building damage) and the
normalized dimension chain (regency -> province, station, people, medics) fully
in memory, mirrored to append-only JSONL files when a data directory is
attached. Reads go through immutable snapshots; writes are serialized by a
single lock so a snapshot never observes a partial write.

Data directory layout (root defaults to ./data, env QDSS_DATA overrides):

    <root>/warehouse/{quakes,stations,provinces,regencies,people,
                      casualties,medics,damage}.jsonl
    <root>/watermarks.jsonl
    <root>/staging/<table>.jsonl
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import geo
from .errors import DuplicateError, ReferentialError, ValidationError
from .model import (
    Alert,
    BuildingDamage,
    CasualtyRecord,
    Medic,
    Person,
    Province,
    QuakeEvent,
    Regency,
    Station,
    Watermark,
    row_from_json,
    row_to_json,
)

TABLE_TYPES: dict[str, type] = {
    "quakes": QuakeEvent,
    "stations": Station,
    "provinces": Province,
    "regencies": Regency,
    "people": Person,
    "casualties": CasualtyRecord,
    "medics": Medic,
    "damage": BuildingDamage,
}

_ID_FIELDS = {
    "quakes": "quake_id",
    "stations": "station_id",
    "provinces": "province_id",
    "regencies": "regency_id",
    "people": "person_id",
    "casualties": "record_id",
    "medics": "medic_id",
    "damage": "damage_id",
}


def data_root(root: str | os.PathLike | None = None) -> Path:
    """Resolve the data directory: explicit arg, then QDSS_DATA, then ./data."""
    if root is not None:
        return Path(root)
    return Path(os.environ.get("QDSS_DATA", "./data"))


@dataclass(frozen=True, slots=True)
class FactFilter:
    """Conjunctive filter for quake facts. Unset members match everything.

    Time bounds are inclusive; magnitude bounds are inclusive; the regency set
    matches a quake through its home regency (nearest centroid to epicenter).
    """

    start: datetime | None = None
    end: datetime | None = None
    regency_ids: frozenset[str] | None = None
    min_magnitude: float | None = None
    max_magnitude: float | None = None

    def validate(self) -> None:
        if self.start and self.end and self.start > self.end:
            raise ValidationError("start: time range inverted (start > end)", "start")
        if (self.min_magnitude is not None and self.max_magnitude is not None
                and self.min_magnitude > self.max_magnitude):
            raise ValidationError("min_magnitude: magnitude band inverted", "min_magnitude")


class Snapshot:
    """Immutable, consistent view of the warehouse at one instant."""

    def __init__(self, tables: dict[str, dict[str, Any]], casualties: tuple, damage: tuple):
        self.quakes: dict[str, QuakeEvent] = tables["quakes"]
        self.stations: dict[str, Station] = tables["stations"]
        self.provinces: dict[str, Province] = tables["provinces"]
        self.regencies: dict[str, Regency] = tables["regencies"]
        self.people: dict[str, Person] = tables["people"]
        self.medics: dict[str, Medic] = tables["medics"]
        self.casualties: tuple[CasualtyRecord, ...] = casualties
        self.damage: tuple[BuildingDamage, ...] = damage
        self._home_regency: dict[str, str] | None = None
        self._casualty_counts: dict[tuple[str, str, str], int] | None = None
        self._damage_counts: dict[tuple[str, str, str], int] | None = None
        self._lock = threading.Lock()

    def row_counts(self) -> dict[str, int]:
        return {
            "quakes": len(self.quakes),
            "stations": len(self.stations),
            "provinces": len(self.provinces),
            "regencies": len(self.regencies),
            "people": len(self.people),
            "casualties": len(self.casualties),
            "medics": len(self.medics),
            "damage": len(self.damage),
        }

    def home_regency(self, quake_id: str) -> str | None:
        """Regency whose centroid is nearest the quake's epicenter (ties by id)."""
        with self._lock:
            if self._home_regency is None:
                points = [(r.regency_id, r.centroid_lat, r.centroid_lon)
                          for r in self.regencies.values()]
                self._home_regency = {
                    q.quake_id: geo.nearest(q.latitude, q.longitude, points) or ""
                    for q in self.quakes.values()
                }
            return self._home_regency.get(quake_id) or None

    def casualty_counts(self) -> dict[tuple[str, str, str], int]:
        """Counts keyed by (quake_id, regency_id, kind), one pass, cached."""
        with self._lock:
            if self._casualty_counts is None:
                counts: dict[tuple[str, str, str], int] = {}
                for c in self.casualties:
                    key = (c.quake_id, c.regency_id, c.kind)
                    counts[key] = counts.get(key, 0) + 1
                self._casualty_counts = counts
            return self._casualty_counts

    def damage_counts(self) -> dict[tuple[str, str, str], int]:
        """Damaged-building sums keyed by (quake_id, regency_id, category), cached."""
        with self._lock:
            if self._damage_counts is None:
                counts: dict[tuple[str, str, str], int] = {}
                for d in self.damage:
                    key = (d.quake_id, d.regency_id, d.category)
                    counts[key] = counts.get(key, 0) + d.damaged_count
                self._damage_counts = counts
            return self._damage_counts

    def query_facts(self, flt: FactFilter | None = None) -> list[QuakeEvent]:
        flt = flt or FactFilter()
        flt.validate()
        rows = []
        for q in self.quakes.values():
            if flt.start and q.occurred_at < flt.start:
                continue
            if flt.end and q.occurred_at > flt.end:
                continue
            if flt.min_magnitude is not None and q.magnitude < flt.min_magnitude:
                continue
            if flt.max_magnitude is not None and q.magnitude > flt.max_magnitude:
                continue
            if flt.regency_ids is not None and self.home_regency(q.quake_id) not in flt.regency_ids:
                continue
            rows.append(q)
        rows.sort(key=lambda q: (q.occurred_at, q.quake_id))
        return rows

    def affected_population(self, regency_ids: Iterable[str]) -> int:
        """Total population over the given regencies (the A_c input)."""
        total = 0
        for rid in set(regency_ids):
            regency = self.regencies.get(rid)
            if regency is None:
                raise ReferentialError(f"regency_id: unknown regency {rid!r}", "regency_id")
            total += regency.population
        return total

    def available_medics(self, regency_ids: Iterable[str]) -> int:
        """Medics whose home province contains any listed regency (the A_m input)."""
        province_ids = set()
        for rid in set(regency_ids):
            regency = self.regencies.get(rid)
            if regency is None:
                raise ReferentialError(f"regency_id: unknown regency {rid!r}", "regency_id")
            province_ids.add(regency.province_id)
        return sum(1 for m in self.medics.values() if m.home_province_id in province_ids)

    def referential_closure_violations(self) -> list[str]:
        """Full-scan check that every stored foreign reference resolves."""
        problems = []
        for q in self.quakes.values():
            if q.station_id not in self.stations:
                problems.append(f"quake {q.quake_id}: station {q.station_id}")
        for r in self.regencies.values():
            if r.province_id not in self.provinces:
                problems.append(f"regency {r.regency_id}: province {r.province_id}")
        for p in self.people.values():
            if p.residence_regency_id not in self.regencies:
                problems.append(f"person {p.person_id}: regency {p.residence_regency_id}")
        for m in self.medics.values():
            if m.person_id not in self.people:
                problems.append(f"medic {m.medic_id}: person {m.person_id}")
            if m.home_province_id not in self.provinces:
                problems.append(f"medic {m.medic_id}: province {m.home_province_id}")
        for c in self.casualties:
            if c.quake_id not in self.quakes:
                problems.append(f"casualty {c.record_id}: quake {c.quake_id}")
            if c.regency_id not in self.regencies:
                problems.append(f"casualty {c.record_id}: regency {c.regency_id}")
            if c.medic_id not in self.medics:
                problems.append(f"casualty {c.record_id}: medic {c.medic_id}")
            if c.person_id is not None and c.person_id not in self.people:
                problems.append(f"casualty {c.record_id}: person {c.person_id}")
        for d in self.damage:
            if d.quake_id not in self.quakes:
                problems.append(f"damage {d.damage_id}: quake {d.quake_id}")
            if d.regency_id not in self.regencies:
                problems.append(f"damage {d.damage_id}: regency {d.regency_id}")
        return problems


class Warehouse:
    """Single-writer store over the snowflake tables, with optional disk mirror."""

    def __init__(self, root: str | os.PathLike | None = None, attach: bool = False):
        self._tables: dict[str, dict[str, Any]] = {name: {} for name in TABLE_TYPES}
        self._watermarks: dict[str, Watermark] = {}
        self._lock = threading.RLock()
        self._version = 0
        self._snapshot_cache: tuple[int, Snapshot] | None = None
        self._root = data_root(root) if (attach or root is not None) else None
        self._pending: dict[str, list[str]] = {name: [] for name in TABLE_TYPES}
        self._pending_watermarks: list[str] = []

    # -- plumbing ---------------------------------------------------------

    @property
    def root(self) -> Path | None:
        return self._root

    def _require_ref(self, table: str, ref_id: str, field: str) -> None:
        if ref_id not in self._tables[table]:
            raise ReferentialError(f"{field}: {ref_id!r} not found in {table}", field)

    def _insert(self, table: str, row: Any) -> str:
        row.validate()
        rid = getattr(row, _ID_FIELDS[table])
        rows = self._tables[table]
        if rid in rows:
            raise DuplicateError(f"{_ID_FIELDS[table]}: duplicate id {rid!r}", _ID_FIELDS[table])
        rows[rid] = row
        if self._root is not None:
            self._pending[table].append(row_to_json(row))
        self._version += 1
        return rid

    # -- writes -----------------------------------------------------------

    def insert_station(self, row: Station) -> str:
        with self._lock:
            return self._insert("stations", row)

    def insert_province(self, row: Province) -> str:
        with self._lock:
            return self._insert("provinces", row)

    def insert_regency(self, row: Regency) -> str:
        with self._lock:
            self._require_ref("provinces", row.province_id, "province_id")
            return self._insert("regencies", row)

    def insert_person(self, row: Person) -> str:
        with self._lock:
            self._require_ref("regencies", row.residence_regency_id, "residence_regency_id")
            return self._insert("people", row)

    def insert_medic(self, row: Medic) -> str:
        with self._lock:
            self._require_ref("people", row.person_id, "person_id")
            self._require_ref("provinces", row.home_province_id, "home_province_id")
            if any(m.person_id == row.person_id for m in self._tables["medics"].values()):
                raise DuplicateError(f"person_id: person {row.person_id!r} already a medic",
                                     "person_id")
            return self._insert("medics", row)

    def insert_quake(self, row: QuakeEvent) -> str:
        with self._lock:
            self._require_ref("stations", row.station_id, "station_id")
            return self._insert("quakes", row)

    def insert_casualty(self, row: CasualtyRecord) -> str:
        with self._lock:
            self._require_ref("quakes", row.quake_id, "quake_id")
            self._require_ref("regencies", row.regency_id, "regency_id")
            self._require_ref("medics", row.medic_id, "medic_id")
            if row.person_id is not None:
                self._require_ref("people", row.person_id, "person_id")
            rid = self._insert("casualties", row)
            # Recording a death keeps the citizen registry consistent.
            if row.kind == "dead" and row.person_id is not None:
                person = self._tables["people"][row.person_id]
                if person.vital_status != "dead":
                    self._tables["people"][row.person_id] = replace(person, vital_status="dead")
            return rid

    def insert_damage(self, row: BuildingDamage) -> str:
        with self._lock:
            self._require_ref("quakes", row.quake_id, "quake_id")
            self._require_ref("regencies", row.regency_id, "regency_id")
            return self._insert("damage", row)

    INSERTERS = {
        "quakes": "insert_quake",
        "stations": "insert_station",
        "provinces": "insert_province",
        "regencies": "insert_regency",
        "people": "insert_person",
        "casualties": "insert_casualty",
        "medics": "insert_medic",
        "damage": "insert_damage",
    }

    def insert(self, table: str, row: Any) -> str:
        if table not in self.INSERTERS:
            raise ValidationError(f"table: unknown table {table!r}", "table")
        return getattr(self, self.INSERTERS[table])(row)

    # -- watermarks ---------------------------------------------------------

    def watermark(self, source_id: str) -> Watermark | None:
        with self._lock:
            return self._watermarks.get(source_id)

    def advance_watermark(self, mark: Watermark) -> None:
        """Set a source's watermark; silently keeps the maximum (never decreases)."""
        with self._lock:
            current = self._watermarks.get(mark.source_id)
            if current is not None and mark.last_extracted_at < current.last_extracted_at:
                return
            self._watermarks[mark.source_id] = mark
            if self._root is not None:
                self._pending_watermarks.append(row_to_json(mark))

    # -- reads --------------------------------------------------------------

    def snapshot(self) -> Snapshot:
        with self._lock:
            if self._snapshot_cache and self._snapshot_cache[0] == self._version:
                return self._snapshot_cache[1]
            tables = {name: dict(rows) for name, rows in self._tables.items()}
            snap = Snapshot(tables,
                            casualties=tuple(self._tables["casualties"].values()),
                            damage=tuple(self._tables["damage"].values()))
            self._snapshot_cache = (self._version, snap)
            return snap

    def query_facts(self, flt: FactFilter | None = None) -> list[QuakeEvent]:
        return self.snapshot().query_facts(flt)

    def affected_population(self, regency_ids: Iterable[str]) -> int:
        return self.snapshot().affected_population(regency_ids)

    def available_medics(self, regency_ids: Iterable[str]) -> int:
        return self.snapshot().available_medics(regency_ids)

    # -- persistence ---------------------------------------------------------

    def flush(self) -> None:
        """Append rows written since the last flush to the JSONL mirror."""
        if self._root is None:
            return
        with self._lock:
            wh_dir = self._root / "warehouse"
            wh_dir.mkdir(parents=True, exist_ok=True)
            for table, lines in self._pending.items():
                if not lines:
                    continue
                with open(wh_dir / f"{table}.jsonl", "a", encoding="utf-8") as fh:
                    fh.write("\n".join(lines) + "\n")
                lines.clear()
            if self._pending_watermarks:
                with open(self._root / "watermarks.jsonl", "a", encoding="utf-8") as fh:
                    fh.write("\n".join(self._pending_watermarks) + "\n")
                self._pending_watermarks.clear()

    def save(self, root: str | os.PathLike | None = None) -> Path:
        """Write every table from scratch (fresh mirror, not an append)."""
        target = data_root(root) if root is not None else self._root
        if target is None:
            raise ValidationError("root: no data directory attached or given", "root")
        with self._lock:
            wh_dir = target / "warehouse"
            wh_dir.mkdir(parents=True, exist_ok=True)
            for table, rows in self._tables.items():
                with open(wh_dir / f"{table}.jsonl", "w", encoding="utf-8") as fh:
                    for row in rows.values():
                        fh.write(row_to_json(row) + "\n")
            with open(target / "watermarks.jsonl", "w", encoding="utf-8") as fh:
                for mark in self._watermarks.values():
                    fh.write(row_to_json(mark) + "\n")
            for lines in self._pending.values():
                lines.clear()
            self._pending_watermarks.clear()
        return target

    @classmethod
    def load(cls, root: str | os.PathLike | None = None, attach: bool = True) -> "Warehouse":
        """Load all JSONL tables from a data directory into a fresh store."""
        src = data_root(root)
        wh = cls()
        wh_dir = src / "warehouse"
        # Dimension tables first so referential checks pass during load.
        order = ["stations", "provinces", "regencies", "people", "medics",
                 "quakes", "casualties", "damage"]
        for table in order:
            path = wh_dir / f"{table}.jsonl"
            if not path.exists():
                continue
            cls_type = TABLE_TYPES[table]
            inserter = getattr(wh, cls.INSERTERS[table])
            for line in _read_lines(path):
                inserter(row_from_json(cls_type, line))
        marks_path = src / "watermarks.jsonl"
        if marks_path.exists():
            for line in _read_lines(marks_path):
                wh.advance_watermark(row_from_json(Watermark, line))
        # Attach only after replay: the mirror already holds these rows.
        if attach:
            wh._root = src
        return wh


def _read_lines(path: Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield line


class StagingStore:
    """Transactional side of the split: append-only operational tables.

    Rows land here first (alert intake, field reports) and reach the warehouse
    only through the ETL path. Each table is one JSONL file under
    <root>/staging/ so any table can be registered as an ETL source.
    """

    def __init__(self, root: str | os.PathLike | None = None):
        self._root = data_root(root)
        self._lock = threading.Lock()
        self._alerts: dict[str, Alert] = {}
        self._load_alerts()

    @property
    def staging_dir(self) -> Path:
        return self._root / "staging"

    def table_path(self, table: str) -> Path:
        return self.staging_dir / f"{table}.jsonl"

    def _load_alerts(self) -> None:
        path = self.table_path("alerts")
        if not path.exists():
            return
        for line in _read_lines(path):
            alert = row_from_json(Alert, line)
            self._alerts[alert.alert_id] = alert

    def record_alert(self, alert: Alert) -> None:
        alert.validate()
        with self._lock:
            if alert.alert_id in self._alerts:
                raise DuplicateError(f"alert_id: duplicate alert {alert.alert_id!r}", "alert_id")
            self._alerts[alert.alert_id] = alert
            self._append("alerts", row_to_json(alert))

    def alerts(self) -> list[Alert]:
        with self._lock:
            return sorted(self._alerts.values(), key=lambda a: (a.issued_at, a.alert_id))

    def record_row(self, table: str, row: Any) -> None:
        """Append an operational row (quake, casualty, damage) for later ETL."""
        row.validate()
        with self._lock:
            self._append(table, row_to_json(row))

    def _append(self, table: str, line: str) -> None:
        self.staging_dir.mkdir(parents=True, exist_ok=True)
        with open(self.table_path(table), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
