"""Deferred, watermark-driven extraction from JSONL sources into the warehouse.

Each registered source is a JSONL file of homogeneous records (quake, casualty
or damage rows). A run reads only records whose timestamp is strictly greater
than the source's stored watermark, validates and inserts them, then advances
the watermark once the inserts are on disk. Re-running over unchanged sources
therefore inserts nothing. Sources must not backdate records: a record written
with a timestamp at or below the watermark is never picked up.

Transformation here is validation plus field mapping only; aggregation is the
OLAP module's job.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import QdssError, ValidationError
from .model import (
    BuildingDamage,
    CasualtyRecord,
    QuakeEvent,
    Watermark,
    parse_ts,
    row_from_dict,
)
from .warehouse import Warehouse, data_root

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# record_kind -> (row type, warehouse table, timestamp field on the wire)
RECORD_KINDS: dict[str, tuple[type, str, str]] = {
    "quake": (QuakeEvent, "quakes", "occurred_at"),
    "casualty": (CasualtyRecord, "casualties", "recorded_at"),
    # Damage rows carry no timestamp of their own; sources wrap them with a
    # recorded_at envelope field that is dropped at load time.
    "damage": (BuildingDamage, "damage", "recorded_at"),
}


@dataclass(frozen=True, slots=True)
class SourceSpec:
    """One line of <root>/sources.jsonl."""

    source_id: str
    path: str
    record_kind: str

    def validate(self) -> None:
        if not self.source_id:
            raise ValidationError("source_id: must be non-empty", "source_id")
        if self.record_kind not in RECORD_KINDS:
            raise ValidationError(
                f"record_kind: {self.record_kind!r} not in {sorted(RECORD_KINDS)}", "record_kind")


@dataclass(slots=True)
class ExtractionBatch:
    source_id: str
    record_kind: str
    records: list[tuple[datetime, dict[str, Any]]]
    extracted_through: datetime
    rejected: list[tuple[int, str]] = field(default_factory=list)  # (line number, reason)


@dataclass(slots=True)
class LoadReport:
    source_id: str
    inserted: int = 0
    rejected: list[tuple[str, str]] = field(default_factory=list)  # (record id / line, reason)


@dataclass(slots=True)
class SourceResult:
    source_id: str
    extracted: int = 0
    inserted: int = 0
    rejected: int = 0
    error: str | None = None


def extract_deferred(source: SourceSpec, watermark: Watermark | None,
                     base_dir: Path | None = None) -> ExtractionBatch:
    """Read the source file, keeping records newer than the watermark.

    Records without a parseable timestamp are reported and skipped; the batch
    keeps going. An unreadable file raises OSError for the caller to handle.
    """
    source.validate()
    if watermark is not None and watermark.source_id != source.source_id:
        raise ValidationError(
            f"watermark: belongs to {watermark.source_id!r}, not {source.source_id!r}",
            "watermark")
    low = watermark.last_extracted_at if watermark else EPOCH
    _, _, ts_field = RECORD_KINDS[source.record_kind]

    path = Path(source.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    records: list[tuple[datetime, dict[str, Any]]] = []
    rejected: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                rejected.append((line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(payload, dict) or ts_field not in payload:
                rejected.append((line_no, f"missing timestamp field {ts_field!r}"))
                continue
            try:
                ts = parse_ts(payload[ts_field], ts_field)
            except ValidationError as exc:
                rejected.append((line_no, str(exc)))
                continue
            if ts > low:
                records.append((ts, payload))

    through = max((ts for ts, _ in records), default=low)
    return ExtractionBatch(source_id=source.source_id, record_kind=source.record_kind,
                           records=records, extracted_through=through, rejected=rejected)


def load_batch(warehouse: Warehouse, batch: ExtractionBatch) -> LoadReport:
    """Insert a batch's valid records, then advance the source watermark.

    Validation or referential failure rejects the whole record (never a partial
    row); the watermark still advances, so rejects are terminal and reported.
    """
    row_type, table, _ = RECORD_KINDS[batch.record_kind]
    report = LoadReport(source_id=batch.source_id)
    for _, payload in batch.records:
        label = str(payload.get(_id_field(row_type), "?"))
        try:
            row = row_from_dict(row_type, payload)
            warehouse.insert(table, row)
        except QdssError as exc:
            report.rejected.append((label, str(exc)))
            continue
        report.inserted += 1
    warehouse.flush()
    if batch.records:
        warehouse.advance_watermark(
            Watermark(source_id=batch.source_id, last_extracted_at=batch.extracted_through))
        warehouse.flush()
    return report


def _id_field(row_type: type) -> str:
    return {QuakeEvent: "quake_id", CasualtyRecord: "record_id",
            BuildingDamage: "damage_id"}[row_type]


def run_etl(warehouse: Warehouse, sources: list[SourceSpec],
            only: str | None = None, base_dir: Path | None = None) -> list[SourceResult]:
    """Extract + load every registered source; failures stay per-source."""
    results = []
    for source in sources:
        if only is not None and source.source_id != only:
            continue
        result = SourceResult(source_id=source.source_id)
        try:
            batch = extract_deferred(source, warehouse.watermark(source.source_id), base_dir)
            result.extracted = len(batch.records)
            report = load_batch(warehouse, batch)
            result.inserted = report.inserted
            result.rejected = len(report.rejected) + len(batch.rejected)
        except (OSError, QdssError) as exc:
            result.error = str(exc)
        results.append(result)
    return results


def load_sources(root: str | os.PathLike | None = None) -> list[SourceSpec]:
    """Read the source registry at <root>/sources.jsonl."""
    path = data_root(root) / "sources.jsonl"
    specs = []
    if not path.exists():
        return specs
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            spec = SourceSpec(source_id=data["source_id"], path=data["path"],
                              record_kind=data["record_kind"])
            spec.validate()
            specs.append(spec)
    return specs


def register_source(spec: SourceSpec, root: str | os.PathLike | None = None) -> None:
    spec.validate()
    base = data_root(root)
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "sources.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"source_id": spec.source_id, "path": spec.path,
                             "record_kind": spec.record_kind}, sort_keys=True) + "\n")
