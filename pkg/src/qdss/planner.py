"""Mitigation resource planning: who is affected, what they need, what past quakes suggest.

Core quantities:

    a_c  citizens inside the predicted quake area
    a_m  medics already in that area
    m_n  medical teams needed   = ceil(a_c / citizens_per_medic)
    m_l  medical team shortfall = m_n - a_m when m_n > a_m, else 0

All provisioning standards (persons per tent, rice per person-day, ...) are
configuration with documented defaults, loaded from <root>/standards.json.
Impact prediction is a k-nearest-neighbor comparison against past quakes over
z-score-normalized (magnitude, depth, exposed population) features.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import geo
from .errors import NoHistoryError, ValidationError
from .model import Alert, Regency
from .warehouse import Snapshot, data_root

CHECKLIST_CATEGORIES = (
    "food",
    "clothing",
    "water",
    "sanitation",
    "rescue_team",
    "health_services",
    "psychological_services",
)

# Which computed quantity vouches for each relief category.
_CHECKLIST_QUANTITY = {
    "food": "rice_kg",
    "clothing": "blankets",
    "water": "sanitation_units",
    "sanitation": "sanitation_units",
    "rescue_team": "volunteers_national",
    "health_services": "medics_needed",
    "psychological_services": "volunteers_national",
}

DEFAULT_UNIT_COSTS = {
    "house": 25_000.0,
    "office": 80_000.0,
    "school": 120_000.0,
    "hospital": 500_000.0,
    "public_place": 60_000.0,
    "infrastructure": 200_000.0,
    "other": 10_000.0,
}


@dataclass(frozen=True, slots=True)
class NeedsStandard:
    """Per-capita provisioning standards. Values are policy, not measurements."""

    citizens_per_medic: float = 1000.0
    persons_per_tent: float = 5.0
    persons_per_sanitation_unit: float = 20.0
    persons_per_food_shelter: float = 500.0
    rice_kg_per_person_day: float = 0.4
    blankets_per_person: int = 1
    citizens_per_volunteer: float = 100.0
    infant_fraction: float = 0.03
    baby_feed_kg_per_infant_day: float = 0.5
    displacement_fraction: float = 0.3
    supply_horizon_days: int = 14
    refugee_capacity_per_site: int = 20_000
    unit_costs: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_UNIT_COSTS))
    level_thresholds: tuple[int, int, int] = (100, 1000, 10000)

    def validate(self) -> None:
        positives = ("citizens_per_medic", "persons_per_tent", "persons_per_sanitation_unit",
                     "persons_per_food_shelter", "rice_kg_per_person_day", "blankets_per_person",
                     "citizens_per_volunteer", "baby_feed_kg_per_infant_day",
                     "refugee_capacity_per_site")
        for name in positives:
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name}: must be > 0", name)
        for name in ("infant_fraction", "displacement_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name}: must be in [0, 1]", name)
        if self.supply_horizon_days < 1:
            raise ValidationError("supply_horizon_days: must be >= 1", "supply_horizon_days")
        if any(cost < 0 for cost in self.unit_costs.values()):
            raise ValidationError("unit_costs: costs must be >= 0", "unit_costs")
        if list(self.level_thresholds) != sorted(self.level_thresholds):
            raise ValidationError("level_thresholds: must be ascending", "level_thresholds")


@dataclass(frozen=True, slots=True)
class NeedsEstimate:
    a_c: int
    medics_needed: int
    medics_available: int
    medic_lack: int
    displaced: int
    tents: int
    sanitation_units: int
    food_shelters: int
    blankets: int
    rice_kg: float
    baby_feed_kg: float
    volunteers_national: int
    refugee_sites: tuple[str, ...]
    total_loss_estimate: float
    category_checklist: dict[str, bool]

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.__dataclass_fields__}
        out["refugee_sites"] = list(self.refugee_sites)
        out["category_checklist"] = dict(self.category_checklist)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NeedsEstimate":
        kwargs = dict(data)
        kwargs["refugee_sites"] = tuple(kwargs.get("refugee_sites", ()))
        return cls(**kwargs)


@dataclass(frozen=True, slots=True)
class Neighbor:
    quake_id: str
    distance: float
    weight: float


@dataclass(frozen=True, slots=True)
class ImpactPrediction:
    predicted_deaths: float
    predicted_injured: float
    predicted_level: int
    neighbors: tuple[Neighbor, ...]

    def to_dict(self) -> dict:
        return {
            "predicted_deaths": self.predicted_deaths,
            "predicted_injured": self.predicted_injured,
            "predicted_level": self.predicted_level,
            "neighbors": [{"quake_id": n.quake_id, "distance": n.distance, "weight": n.weight}
                          for n in self.neighbors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImpactPrediction":
        return cls(predicted_deaths=data["predicted_deaths"],
                   predicted_injured=data["predicted_injured"],
                   predicted_level=data["predicted_level"],
                   neighbors=tuple(Neighbor(**n) for n in data["neighbors"]))


@dataclass(frozen=True, slots=True)
class HistoryRow:
    """One past quake with its observed outcome, the KNN training row."""

    quake_id: str
    magnitude: float
    depth_km: float
    exposed_population: int
    deaths: int
    injured: int


@dataclass(frozen=True, slots=True)
class SitingResult:
    sites: tuple[str, ...]
    shortfall: int


def geo_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle kilometers between two (lat, lon) points."""
    return geo.haversine_km(a[0], a[1], b[0], b[1])


def affected_regencies(epicenter: tuple[float, float], radius_km: float,
                       regencies: Iterable[Regency]) -> set[str]:
    """Regencies whose centroid lies within radius_km of the epicenter (inclusive)."""
    if not radius_km > 0:
        raise ValidationError("radius_km: must be > 0", "radius_km")
    lat, lon = epicenter
    return {r.regency_id for r in regencies
            if geo.haversine_km(lat, lon, r.centroid_lat, r.centroid_lon) <= radius_km}


def medics_needed(a_c: float, n_mc: float) -> int:
    """Teams needed for a_c citizens, rounded up: fractional teams are meaningless."""
    if not n_mc > 0:
        raise ValidationError("n_mc: must be > 0", "n_mc")
    if a_c < 0:
        raise ValidationError("a_c: must be >= 0", "a_c")
    if float(a_c).is_integer() and float(n_mc).is_integer():
        return -(-int(a_c) // int(n_mc))
    return math.ceil(a_c / n_mc)


def medic_lack(m_n: int, a_m: int) -> int:
    """Shortfall of teams; zero when the area already has enough."""
    if m_n < 0 or a_m < 0:
        raise ValidationError("m_n/a_m: must be >= 0", "m_n")
    return m_n - a_m if m_n > a_m else 0


def estimate_needs(a_c: int, a_m: int, standard: NeedsStandard,
                   damage_counts: dict[str, int] | None = None) -> NeedsEstimate:
    """Full provisioning plan for a_c affected citizens.

    Quantities scale off the displaced count (a_c times the displacement
    fraction) except medical teams, which cover the whole affected population.
    Loss is damaged-building counts priced at per-category unit costs;
    refugee_sites is left empty here and filled by the siting step.
    """
    standard.validate()
    if a_c < 0 or a_m < 0:
        raise ValidationError("a_c/a_m: must be >= 0", "a_c")
    displaced = round(a_c * standard.displacement_fraction)
    tents = math.ceil(displaced / standard.persons_per_tent)
    sanitation_units = math.ceil(displaced / standard.persons_per_sanitation_unit)
    food_shelters = math.ceil(displaced / standard.persons_per_food_shelter)
    volunteers = math.ceil(displaced / standard.citizens_per_volunteer)
    rice_kg = displaced * standard.rice_kg_per_person_day * standard.supply_horizon_days
    infants = round(displaced * standard.infant_fraction)
    baby_feed_kg = infants * standard.baby_feed_kg_per_infant_day * standard.supply_horizon_days
    blankets = displaced * standard.blankets_per_person
    m_n = medics_needed(a_c, standard.citizens_per_medic)
    m_l = medic_lack(m_n, a_m)
    loss = sum(count * standard.unit_costs.get(category, 0.0)
               for category, count in (damage_counts or {}).items())

    quantities = {
        "rice_kg": rice_kg,
        "blankets": blankets,
        "sanitation_units": sanitation_units,
        "volunteers_national": volunteers,
        "medics_needed": m_n,
    }
    checklist = {category: a_c == 0 or quantities[_CHECKLIST_QUANTITY[category]] > 0
                 for category in CHECKLIST_CATEGORIES}

    return NeedsEstimate(
        a_c=a_c, medics_needed=m_n, medics_available=a_m, medic_lack=m_l,
        displaced=displaced, tents=tents, sanitation_units=sanitation_units,
        food_shelters=food_shelters, blankets=blankets, rice_kg=rice_kg,
        baby_feed_kg=baby_feed_kg, volunteers_national=volunteers,
        refugee_sites=(), total_loss_estimate=loss, category_checklist=checklist)


def site_refugees(affected: set[str], regencies: Iterable[Regency], displaced: int,
                  capacity_per_site: int) -> SitingResult:
    """Nearest non-affected regencies to the affected area's centroid, chosen
    greedily until capacity covers the displaced. Ties break by regency_id."""
    if not capacity_per_site > 0:
        raise ValidationError("capacity_per_site: must be > 0", "capacity_per_site")
    if displaced <= 0:
        return SitingResult(sites=(), shortfall=0)
    regencies = list(regencies)
    hit = [r for r in regencies if r.regency_id in affected]
    if hit:
        lat = sum(r.centroid_lat for r in hit) / len(hit)
        lon = sum(r.centroid_lon for r in hit) / len(hit)
    else:
        lat = lon = 0.0
    candidates = sorted(
        (r for r in regencies if r.regency_id not in affected),
        key=lambda r: (geo.haversine_km(lat, lon, r.centroid_lat, r.centroid_lon), r.regency_id))
    sites: list[str] = []
    covered = 0
    for r in candidates:
        if covered >= displaced:
            break
        sites.append(r.regency_id)
        covered += capacity_per_site
    return SitingResult(sites=tuple(sites), shortfall=max(0, displaced - covered))


def disaster_level(predicted_deaths: float, m_l: int,
                   thresholds: tuple[int, int, int] = (100, 1000, 10000)) -> int:
    """Severity tier 1-4 (local / province / national / international)."""
    t1, t2, t3 = thresholds
    if predicted_deaths < t1 and m_l == 0:
        return 1
    if predicted_deaths < t2:
        return 2
    if predicted_deaths < t3 or m_l > 0:
        return 3
    return 4


def predict_impact(magnitude: float, depth_km: float, exposed_population: int,
                   history: Sequence[HistoryRow], k: int = 3,
                   m_l: int = 0,
                   thresholds: tuple[int, int, int] = (100, 1000, 10000)) -> ImpactPrediction:
    """KNN over past quakes: z-normalize (magnitude, depth, exposed population),
    take the k nearest by Euclidean distance (ties by quake_id), and average
    outcomes with inverse-distance weights scaled by the exposure ratio.

    A zero-distance neighbor takes all the weight (split evenly across exact
    duplicates). History order does not matter.
    """
    if k < 1:
        raise ValidationError("k: must be >= 1", "k")
    if not history:
        raise NoHistoryError("impact prediction needs at least one past quake")
    rows = sorted(history, key=lambda h: h.quake_id)
    features = np.array([[h.magnitude, h.depth_km, h.exposed_population] for h in rows],
                        dtype=float)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    safe_std = np.where(std == 0, 1.0, std)
    norm = (features - mean) / safe_std
    norm[:, std == 0] = 0.0
    query = (np.array([magnitude, depth_km, exposed_population], dtype=float) - mean) / safe_std
    query[std == 0] = 0.0

    dists = np.sqrt(((norm - query) ** 2).sum(axis=1))
    order = sorted(range(len(rows)), key=lambda i: (dists[i], rows[i].quake_id))
    chosen = order[:min(k, len(rows))]

    d = [float(dists[i]) for i in chosen]
    if min(d) == 0.0:
        zero = [x == 0.0 for x in d]
        n_zero = sum(zero)
        weights = [1.0 / n_zero if z else 0.0 for z in zero]
    else:
        inv = [1.0 / x for x in d]
        total = sum(inv)
        weights = [x / total for x in inv]

    deaths = injured = 0.0
    for idx, w in zip(chosen, weights):
        h = rows[idx]
        ratio = exposed_population / h.exposed_population if h.exposed_population > 0 else 1.0
        deaths += w * h.deaths * ratio
        injured += w * h.injured * ratio

    neighbors = tuple(Neighbor(rows[i].quake_id, dist, w)
                      for i, dist, w in zip(chosen, d, weights))
    return ImpactPrediction(predicted_deaths=deaths, predicted_injured=injured,
                            predicted_level=disaster_level(deaths, m_l, thresholds),
                            neighbors=neighbors)


def build_history(snapshot: Snapshot) -> list[HistoryRow]:
    """Derive KNN training rows from the warehouse.

    Exposure for a past quake is the population of regencies whose centroid
    falls inside the circle of the same area as the quake's recorded
    affected_area_km2, centered on its epicenter.
    """
    counts = snapshot.casualty_counts()
    deaths: dict[str, int] = {}
    injured: dict[str, int] = {}
    for (qid, _rid, kind), n in counts.items():
        target = deaths if kind == "dead" else injured
        target[qid] = target.get(qid, 0) + n
    rows = []
    regencies = list(snapshot.regencies.values())
    for qid in sorted(snapshot.quakes):
        q = snapshot.quakes[qid]
        radius = math.sqrt(q.affected_area_km2 / math.pi) if q.affected_area_km2 > 0 else 0.0
        exposed = 0
        if radius > 0:
            exposed = sum(r.population for r in regencies
                          if geo.haversine_km(q.latitude, q.longitude,
                                              r.centroid_lat, r.centroid_lon) <= radius)
        rows.append(HistoryRow(quake_id=qid, magnitude=q.magnitude, depth_km=q.depth_km,
                               exposed_population=exposed,
                               deaths=deaths.get(qid, 0), injured=injured.get(qid, 0)))
    return rows


@dataclass(frozen=True, slots=True)
class PlanResult:
    needs: NeedsEstimate
    prediction: ImpactPrediction | None
    affected_regency_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "needs": self.needs.to_dict(),
            "prediction": self.prediction.to_dict() if self.prediction else None,
            "affected_regency_ids": list(self.affected_regency_ids),
        }


def plan_for_alert(snapshot: Snapshot, alert: Alert, standard: NeedsStandard,
                   k: int = 3) -> PlanResult:
    """Assemble the full plan: affected area, needs, siting and prediction."""
    affected = affected_regencies((alert.epicenter_lat, alert.epicenter_lon),
                                  alert.radius_km, snapshot.regencies.values())
    a_c = snapshot.affected_population(affected)
    a_m = snapshot.available_medics(affected)

    damage_by_category: dict[str, int] = {}
    for (qid, _rid, category), n in snapshot.damage_counts().items():
        q = snapshot.quakes[qid]
        if geo.haversine_km(alert.epicenter_lat, alert.epicenter_lon,
                            q.latitude, q.longitude) <= alert.radius_km:
            damage_by_category[category] = damage_by_category.get(category, 0) + n

    needs = estimate_needs(a_c, a_m, standard, damage_by_category)
    siting = site_refugees(affected, snapshot.regencies.values(), needs.displaced,
                           standard.refugee_capacity_per_site)
    needs = replace(needs, refugee_sites=siting.sites)

    history = build_history(snapshot)
    prediction = None
    if history:
        prediction = predict_impact(alert.magnitude, alert.depth_km, a_c, history, k,
                                    m_l=needs.medic_lack, thresholds=standard.level_thresholds)
    return PlanResult(needs=needs, prediction=prediction,
                      affected_regency_ids=tuple(sorted(affected)))


def load_standards(root: str | os.PathLike | None = None) -> NeedsStandard:
    """Read <root>/standards.json, falling back to the documented defaults."""
    path = data_root(root) / "standards.json"
    if not path.exists():
        return NeedsStandard()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    kwargs = {}
    for name in NeedsStandard.__dataclass_fields__:
        if name in data:
            value = data[name]
            if name == "level_thresholds":
                value = tuple(value)
            kwargs[name] = value
    standard = NeedsStandard(**kwargs)
    standard.validate()
    return standard


def save_standards(standard: NeedsStandard, root: str | os.PathLike | None = None) -> None:
    base = data_root(root)
    base.mkdir(parents=True, exist_ok=True)
    data = {name: getattr(standard, name) for name in NeedsStandard.__dataclass_fields__}
    data["level_thresholds"] = list(standard.level_thresholds)
    with open(base / "standards.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
