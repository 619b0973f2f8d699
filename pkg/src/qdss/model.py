"""Domain rows for the quake warehouse and the alert stream.

Every row type is a frozen, slotted dataclass with a `validate()` that
checks range bounds only; referential checks live in the stores, which know
what else exists. Serialization is one flat JSON object per row with field
names matching the dataclass exactly, timestamps RFC 3339 UTC at second
precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from typing import Any

from .errors import ParseError, ValidationError

CASUALTY_KINDS = ("dead", "injured")
VITAL_STATUSES = ("alive", "dead")
DAMAGE_CATEGORIES = (
    "house",
    "office",
    "school",
    "hospital",
    "public_place",
    "infrastructure",
    "other",
)
DAMAGE_SEVERITIES = ("light", "moderate", "destroyed")


def parse_ts(value: str, field: str = "timestamp") -> datetime:
    """Parse an RFC 3339 UTC timestamp ('...Z' or '+00:00') at second precision."""
    if not isinstance(value, str):
        raise ValidationError(f"{field}: expected RFC 3339 string, got {value!r}", field)
    text = value[:-1] + "+00:00" if value.endswith("Z") else value
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"{field}: not a valid timestamp: {value!r}", field) from exc
    if ts.tzinfo is None:
        raise ValidationError(f"{field}: timestamp must carry a UTC offset: {value!r}", field)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ")


def _check_range(name: str, value: float, lo: float, hi: float,
                 lo_open: bool = False, hi_open: bool = False) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{name}: expected a number, got {value!r}", name)
    above = value > lo if lo_open else value >= lo
    below = value < hi if hi_open else value <= hi
    if not (above and below):
        lo_b = "(" if lo_open else "["
        hi_b = ")" if hi_open else "]"
        raise ValidationError(f"{name}: {value} outside {lo_b}{lo}, {hi}{hi_b}", name)


def _check_nonneg(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
        raise ValidationError(f"{name}: must be >= 0, got {value!r}", name)


def _check_id(name: str, value: Any) -> None:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{name}: must be a non-empty string, got {value!r}", name)


@dataclass(frozen=True, slots=True)
class QuakeEvent:
    """One fact row: when, where and how big a quake was."""

    quake_id: str
    occurred_at: datetime
    latitude: float
    longitude: float
    magnitude: float
    depth_km: float
    rupture_length_km: float
    affected_area_km2: float
    station_id: str

    def validate(self) -> None:
        _check_id("quake_id", self.quake_id)
        _check_range("latitude", self.latitude, -90, 90)
        _check_range("longitude", self.longitude, -180, 180)
        _check_range("magnitude", self.magnitude, 0, 10, lo_open=True)
        _check_nonneg("depth_km", self.depth_km)
        _check_nonneg("rupture_length_km", self.rupture_length_km)
        _check_nonneg("affected_area_km2", self.affected_area_km2)
        _check_id("station_id", self.station_id)


@dataclass(frozen=True, slots=True)
class Station:
    station_id: str
    name: str
    latitude: float
    longitude: float

    def validate(self) -> None:
        _check_id("station_id", self.station_id)
        _check_range("latitude", self.latitude, -90, 90)
        _check_range("longitude", self.longitude, -180, 180)


@dataclass(frozen=True, slots=True)
class Province:
    province_id: str
    name: str
    centroid_lat: float
    centroid_lon: float

    def validate(self) -> None:
        _check_id("province_id", self.province_id)
        _check_range("centroid_lat", self.centroid_lat, -90, 90)
        _check_range("centroid_lon", self.centroid_lon, -180, 180)


@dataclass(frozen=True, slots=True)
class Regency:
    """Second-level administrative area; the only geography facts reference."""

    regency_id: str
    province_id: str
    name: str
    centroid_lat: float
    centroid_lon: float
    population: int

    def validate(self) -> None:
        _check_id("regency_id", self.regency_id)
        _check_id("province_id", self.province_id)
        _check_range("centroid_lat", self.centroid_lat, -90, 90)
        _check_range("centroid_lon", self.centroid_lon, -180, 180)
        _check_nonneg("population", self.population)


@dataclass(frozen=True, slots=True)
class Person:
    """Citizen registry row under the one-identity-per-citizen rule."""

    person_id: str
    name: str
    birth_date: str  # calendar date, YYYY-MM-DD
    residence_regency_id: str
    vital_status: str

    def validate(self) -> None:
        _check_id("person_id", self.person_id)
        _check_id("residence_regency_id", self.residence_regency_id)
        if self.vital_status not in VITAL_STATUSES:
            raise ValidationError(
                f"vital_status: {self.vital_status!r} not in {VITAL_STATUSES}", "vital_status")
        try:
            datetime.strptime(self.birth_date, "%Y-%m-%d")
        except (TypeError, ValueError) as exc:
            raise ValidationError(
                f"birth_date: expected YYYY-MM-DD, got {self.birth_date!r}", "birth_date") from exc


@dataclass(frozen=True, slots=True)
class CasualtyRecord:
    """One victim of one quake. person_id is optional: many victims go unidentified."""

    record_id: str
    quake_id: str
    person_id: str | None
    kind: str
    regency_id: str
    medic_id: str
    recorded_at: datetime

    def validate(self) -> None:
        _check_id("record_id", self.record_id)
        _check_id("quake_id", self.quake_id)
        if self.person_id is not None:
            _check_id("person_id", self.person_id)
        if self.kind not in CASUALTY_KINDS:
            raise ValidationError(f"kind: {self.kind!r} not in {CASUALTY_KINDS}", "kind")
        _check_id("regency_id", self.regency_id)
        _check_id("medic_id", self.medic_id)


@dataclass(frozen=True, slots=True)
class Medic:
    medic_id: str
    person_id: str
    home_province_id: str

    def validate(self) -> None:
        _check_id("medic_id", self.medic_id)
        _check_id("person_id", self.person_id)
        _check_id("home_province_id", self.home_province_id)


@dataclass(frozen=True, slots=True)
class BuildingDamage:
    damage_id: str
    quake_id: str
    regency_id: str
    category: str
    damaged_count: int
    severity: str

    def validate(self) -> None:
        _check_id("damage_id", self.damage_id)
        _check_id("quake_id", self.quake_id)
        _check_id("regency_id", self.regency_id)
        if self.category not in DAMAGE_CATEGORIES:
            raise ValidationError(f"category: {self.category!r} not in {DAMAGE_CATEGORIES}", "category")
        _check_nonneg("damaged_count", self.damaged_count)
        if self.severity not in DAMAGE_SEVERITIES:
            raise ValidationError(f"severity: {self.severity!r} not in {DAMAGE_SEVERITIES}", "severity")


@dataclass(frozen=True, slots=True)
class Watermark:
    """Last-extraction timestamp for one ETL source. Never decreases."""

    source_id: str
    last_extracted_at: datetime

    def validate(self) -> None:
        _check_id("source_id", self.source_id)


@dataclass(frozen=True, slots=True)
class Alert:
    """One early-warning message from the seismic agency feed."""

    alert_id: str
    issued_at: datetime
    magnitude: float
    epicenter_lat: float
    epicenter_lon: float
    depth_km: float
    radius_km: float
    high_risk: bool

    def validate(self) -> None:
        _check_id("alert_id", self.alert_id)
        _check_range("magnitude", self.magnitude, 0, 10, lo_open=True)
        _check_range("epicenter_lat", self.epicenter_lat, -90, 90)
        _check_range("epicenter_lon", self.epicenter_lon, -180, 180)
        _check_nonneg("depth_km", self.depth_km)
        _check_range("radius_km", self.radius_km, 0, float("inf"), lo_open=True)
        if not isinstance(self.high_risk, bool):
            raise ValidationError(f"high_risk: expected boolean, got {self.high_risk!r}", "high_risk")


_TS_FIELDS = {"occurred_at", "recorded_at", "last_extracted_at", "issued_at"}


def row_to_dict(row: Any) -> dict[str, Any]:
    """Flat dict with RFC 3339 strings for timestamps; key order matches the type."""
    out = {}
    for f in fields(row):
        value = getattr(row, f.name)
        out[f.name] = format_ts(value) if isinstance(value, datetime) else value
    return out


def row_to_json(row: Any) -> str:
    return json.dumps(row_to_dict(row), sort_keys=True, separators=(",", ":"))


def row_from_dict(cls: type, data: dict[str, Any]) -> Any:
    """Build a row of `cls` from a decoded JSON object, validating it."""
    names = {f.name for f in fields(cls)}
    missing = names - set(data)
    if missing:
        raise ValidationError(f"{cls.__name__}: missing field(s) {sorted(missing)}",
                              sorted(missing)[0])
    kwargs = {}
    for name in names:
        value = data[name]
        if name in _TS_FIELDS:
            value = parse_ts(value, name)
        kwargs[name] = value
    row = cls(**kwargs)
    row.validate()
    return row


def row_from_json(cls: type, line: str) -> Any:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{cls.__name__}: invalid JSON at byte {exc.pos}: {exc.msg}",
                         offset=exc.pos) from exc
    if not isinstance(data, dict):
        raise ParseError(f"{cls.__name__}: expected a JSON object", offset=0)
    return row_from_dict(cls, data)
