"""Simulated external systems: the seismic-agency alert stream plus the
national demography and health registries.

Real integrations are replaced by JSONL feed files and a replay engine; the
functions here are the seam where live clients would plug in. The alert wire
format is one JSON object per line with exactly the Alert fields.

Feed files live under <root>/feeds/:

    alerts.jsonl      scripted alert stream
    demography.jsonl  {regency_id, population} rows + national-total footer
    health.jsonl      {province_id, medics, deployable} rows + footer
"""

from __future__ import annotations

import json
import os
import random
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import NotFoundError, ParseError, ValidationError
from .model import Alert, Regency, row_from_dict, row_to_json
from .warehouse import data_root

ALERT_FIELDS = frozenset(Alert.__dataclass_fields__)

DEFAULT_HIGH_RISK_MAGNITUDE = 7.0
DEFAULT_HIGH_RISK_POPULATION = 500_000
DEFAULT_SCRIPT_START = datetime(2026, 1, 1, tzinfo=timezone.utc)


def parse_alert(line: str) -> Alert:
    """Decode one wire-format alert line, reporting byte offsets on bad JSON."""
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"alert: invalid JSON at byte {exc.pos}: {exc.msg}",
                         offset=exc.pos) from exc
    if not isinstance(data, dict):
        raise ParseError("alert: expected a JSON object", offset=0)
    missing = ALERT_FIELDS - set(data)
    if missing:
        raise ParseError(f"alert: missing field(s) {sorted(missing)}", offset=0)
    return row_from_dict(Alert, data)


def serialize_alert(alert: Alert) -> str:
    """Canonical one-line form; parse_alert(serialize_alert(a)) == a."""
    alert.validate()
    return row_to_json(alert)


def compute_high_risk(magnitude: float, epicenter: tuple[float, float], radius_km: float,
                      regencies: Iterable[Regency] = (),
                      magnitude_threshold: float = DEFAULT_HIGH_RISK_MAGNITUDE,
                      population_threshold: int = DEFAULT_HIGH_RISK_POPULATION) -> bool:
    """High risk: big quake, or a heavily populated regency inside the radius."""
    if magnitude >= magnitude_threshold:
        return True
    from . import geo
    lat, lon = epicenter
    return any(r.population >= population_threshold
               and geo.haversine_km(lat, lon, r.centroid_lat, r.centroid_lon) <= radius_km
               for r in regencies)


def generate_script(rate_per_day: float, days: int, seed: int,
                    start: datetime = DEFAULT_SCRIPT_START,
                    high_risk_fraction: float = 0.12,
                    magnitude_threshold: float = DEFAULT_HIGH_RISK_MAGNITUDE) -> list[Alert]:
    """Deterministic synthetic alert stream with exponential inter-arrivals.

    Alerts arrive at a mean rate of rate_per_day (the national range runs from
    a handful to a few dozen daily), with high-magnitude alerts a configured
    minority. The same seed reproduces the same script byte for byte.
    """
    if not 5 <= rate_per_day <= 30:
        raise ValidationError(f"rate_per_day: {rate_per_day} outside [5, 30]", "rate_per_day")
    if days < 1:
        raise ValidationError(f"days: {days} must be >= 1", "days")
    rng = random.Random(seed)
    horizon = days * 86400.0
    mean_gap = 86400.0 / rate_per_day
    alerts: list[Alert] = []
    t = rng.expovariate(1.0 / mean_gap)
    n = 0
    while t < horizon:
        if rng.random() < high_risk_fraction:
            magnitude = round(rng.uniform(magnitude_threshold, 9.4), 1)
        else:
            magnitude = round(rng.uniform(3.0, magnitude_threshold - 0.1), 1)
        issued_at = (start + timedelta(seconds=int(t))).replace(microsecond=0)
        alert = Alert(
            alert_id=f"sim-{seed}-{n:05d}",
            issued_at=issued_at,
            magnitude=magnitude,
            epicenter_lat=round(rng.uniform(-11.0, 6.0), 3),
            epicenter_lon=round(rng.uniform(95.0, 141.0), 3),
            depth_km=round(rng.uniform(5.0, 200.0), 1),
            radius_km=round(20.0 + (magnitude - 3.0) * 35.0, 1),
            high_risk=magnitude >= magnitude_threshold,
        )
        alert.validate()
        alerts.append(alert)
        n += 1
        t += rng.expovariate(1.0 / mean_gap)
    return alerts


def script_to_text(script: Sequence[Alert]) -> str:
    return "".join(serialize_alert(a) + "\n" for a in script)


def write_script(script: Sequence[Alert], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(script_to_text(script), encoding="utf-8")


def read_script(path: str | Path) -> list[Alert]:
    script = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                script.append(parse_alert(line))
    return script


def replay(script: Sequence[Alert], speedup: float,
           deliver: Callable[[Alert], None],
           sleep: Callable[[float], None] = time.sleep,
           clock: Callable[[], float] = time.monotonic) -> int:
    """Deliver a sorted script in order, inter-arrival gaps divided by speedup.

    Never reorders and never drops: the delivery sequence equals the script
    sequence at any speedup. Returns the number delivered.
    """
    if speedup <= 0:
        raise ValidationError("speedup: must be > 0", "speedup")
    for earlier, later in zip(script, script[1:]):
        if later.issued_at < earlier.issued_at:
            raise ValidationError("script: alerts not sorted by issued_at", "script")
    if not script:
        return 0
    base = script[0].issued_at
    started = clock()
    delivered = 0
    for alert in script:
        target = (alert.issued_at - base).total_seconds() / speedup
        lag = target - (clock() - started)
        if lag > 0:
            sleep(lag)
        deliver(alert)
        delivered += 1
    return delivered


@dataclass(frozen=True, slots=True)
class DemographyFeed:
    """Read-only regency population registry with a national-total footer."""

    populations: dict[str, int]
    national_population: int

    def lookup(self, regency_id: str) -> int:
        if regency_id not in self.populations:
            raise NotFoundError(f"regency_id: {regency_id!r} not in demography feed")
        return self.populations[regency_id]


@dataclass(frozen=True, slots=True)
class HealthFeed:
    """Read-only per-province medic registry: staffed counts and deployable teams."""

    medics: dict[str, tuple[int, int]]  # province_id -> (medics, deployable)
    national_medics: int
    national_deployable: int

    def lookup(self, province_id: str) -> tuple[int, int]:
        if province_id not in self.medics:
            raise NotFoundError(f"province_id: {province_id!r} not in health feed")
        return self.medics[province_id]


def feeds_dir(root: str | os.PathLike | None = None) -> Path:
    return data_root(root) / "feeds"


def load_demography(root: str | os.PathLike | None = None) -> DemographyFeed:
    path = feeds_dir(root) / "demography.jsonl"
    populations: dict[str, int] = {}
    footer_total: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if data.get("footer"):
                footer_total = int(data["national_population"])
            else:
                populations[data["regency_id"]] = int(data["population"])
    total = footer_total if footer_total is not None else sum(populations.values())
    return DemographyFeed(populations=populations, national_population=total)


def load_health(root: str | os.PathLike | None = None) -> HealthFeed:
    path = feeds_dir(root) / "health.jsonl"
    medics: dict[str, tuple[int, int]] = {}
    total_medics: int | None = None
    total_deployable: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if data.get("footer"):
                total_medics = int(data["national_medics"])
                total_deployable = int(data["national_deployable"])
            else:
                medics[data["province_id"]] = (int(data["medics"]), int(data["deployable"]))
    if total_medics is None:
        total_medics = sum(m for m, _ in medics.values())
    if total_deployable is None:
        total_deployable = sum(d for _, d in medics.values())
    return HealthFeed(medics=medics, national_medics=total_medics,
                      national_deployable=total_deployable)


def write_demography(populations: dict[str, int], root: str | os.PathLike | None = None) -> Path:
    path = feeds_dir(root) / "demography.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for regency_id in sorted(populations):
            fh.write(json.dumps({"regency_id": regency_id,
                                 "population": populations[regency_id]},
                                sort_keys=True) + "\n")
        fh.write(json.dumps({"footer": True,
                             "national_population": sum(populations.values())},
                            sort_keys=True) + "\n")
    return path


def write_health(medics: dict[str, tuple[int, int]],
                 root: str | os.PathLike | None = None) -> Path:
    path = feeds_dir(root) / "health.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for province_id in sorted(medics):
            staffed, deployable = medics[province_id]
            fh.write(json.dumps({"province_id": province_id, "medics": staffed,
                                 "deployable": deployable}, sort_keys=True) + "\n")
        fh.write(json.dumps({"footer": True,
                             "national_medics": sum(m for m, _ in medics.values()),
                             "national_deployable": sum(d for _, d in medics.values())},
                            sort_keys=True) + "\n")
    return path
