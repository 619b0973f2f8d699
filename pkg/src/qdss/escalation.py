"""Incident lifecycle: the two-stage SOS protocol with operator approval gates.

An incident opens when an alert arrives, is assessed into a needs plan, and —
if the area lacks medical teams — escalates in two stages: first to nearby
provinces and national stock, then (still short after stage one closes) to
international institutions. Both dispatches require a recorded operator
approval: the decision stays human, the bookkeeping does not.

Every event appends one audit entry; replaying a log reproduces the incident.
Logs persist one file per incident under <root>/incidents/<id>.log.jsonl.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    ApprovalRequiredError,
    DuplicateError,
    StateError,
    ValidationError,
)
from .model import Alert, format_ts, parse_ts, row_from_dict, row_to_dict
from .planner import ImpactPrediction, NeedsEstimate, PlanResult, plan_for_alert
from . import geo


class IncidentState(str, Enum):
    RECEIVED = "Received"
    ASSESSED = "Assessed"
    AWAITING_SOS1_APPROVAL = "AwaitingSOS1Approval"
    SOS1_DISPATCHED = "SOS1Dispatched"
    SOS1_CLOSED = "SOS1Closed"
    AWAITING_SOS2_APPROVAL = "AwaitingSOS2Approval"
    SOS2_DISPATCHED = "SOS2Dispatched"
    RESOLVED = "Resolved"
    CLOSED = "Closed"


TRANSITIONS: dict[IncidentState, frozenset[IncidentState]] = {
    IncidentState.RECEIVED: frozenset({IncidentState.ASSESSED, IncidentState.RESOLVED}),
    IncidentState.ASSESSED: frozenset({IncidentState.AWAITING_SOS1_APPROVAL}),
    IncidentState.AWAITING_SOS1_APPROVAL: frozenset({IncidentState.SOS1_DISPATCHED}),
    IncidentState.SOS1_DISPATCHED: frozenset({IncidentState.RESOLVED, IncidentState.SOS1_CLOSED}),
    IncidentState.SOS1_CLOSED: frozenset({IncidentState.AWAITING_SOS2_APPROVAL,
                                          IncidentState.RESOLVED}),
    IncidentState.AWAITING_SOS2_APPROVAL: frozenset({IncidentState.SOS2_DISPATCHED}),
    IncidentState.SOS2_DISPATCHED: frozenset({IncidentState.RESOLVED}),
    IncidentState.RESOLVED: frozenset({IncidentState.CLOSED}),
    IncidentState.CLOSED: frozenset(),
}

NATIONAL_ORIGIN = "national"


@dataclass(frozen=True, slots=True)
class ProvinceCapacity:
    """Standardized medical teams one province can send out during a disaster."""

    province_id: str
    medics_deployable: int

    def validate(self) -> None:
        if not self.province_id:
            raise ValidationError("province_id: must be non-empty", "province_id")
        if self.medics_deployable < 0:
            raise ValidationError("medics_deployable: must be >= 0", "medics_deployable")


@dataclass(frozen=True, slots=True)
class Pledge:
    pledge_id: str
    incident_id: str
    origin: str
    medics_pledged: int
    stage: int
    pledged_at: datetime

    def to_dict(self) -> dict:
        out = row_to_dict(self)
        return out


@dataclass(frozen=True, slots=True)
class DispatchRequest:
    origin: str
    medics_requested: int


@dataclass(frozen=True, slots=True)
class AuditEntry:
    seq: int
    at: datetime
    actor: str
    event: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "at": format_ts(self.at), "actor": self.actor,
                "event": self.event, "payload": self.payload}


@dataclass(slots=True)
class Incident:
    incident_id: str
    alert: Alert
    state: IncidentState = IncidentState.RECEIVED
    needs: NeedsEstimate | None = None
    prediction: ImpactPrediction | None = None
    declared_level: int | None = None
    pledges: list[Pledge] = field(default_factory=list)
    base_lack: int = 0
    residual_lack: int = 0
    affected_regency_ids: tuple[str, ...] = ()
    affected_province_ids: frozenset[str] = frozenset()
    dispatch_plan: tuple[DispatchRequest, ...] = ()
    audit_log: list[AuditEntry] = field(default_factory=list)

    @property
    def alert_id(self) -> str:
        return self.alert.alert_id

    def pledged_total(self) -> int:
        return sum(p.medics_pledged for p in self.pledges)

    def clone(self) -> "Incident":
        copy = Incident(incident_id=self.incident_id, alert=self.alert, state=self.state,
                        needs=self.needs, prediction=self.prediction,
                        declared_level=self.declared_level, pledges=list(self.pledges),
                        base_lack=self.base_lack, residual_lack=self.residual_lack,
                        affected_regency_ids=self.affected_regency_ids,
                        affected_province_ids=self.affected_province_ids,
                        dispatch_plan=self.dispatch_plan, audit_log=list(self.audit_log))
        return copy

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "alert": row_to_dict(self.alert),
            "state": self.state.value,
            "needs": self.needs.to_dict() if self.needs else None,
            "prediction": self.prediction.to_dict() if self.prediction else None,
            "declared_level": self.declared_level,
            "pledges": [p.to_dict() for p in self.pledges],
            "residual_lack": self.residual_lack,
            "affected_regency_ids": list(self.affected_regency_ids),
            "dispatch_plan": [{"origin": d.origin, "medics_requested": d.medics_requested}
                              for d in self.dispatch_plan],
            "audit_log": [e.to_dict() for e in self.audit_log],
        }


class IncidentEngine:
    """Serial processor for incident events; incidents are independent."""

    def __init__(self, province_ids: Iterable[str] = (),
                 audit_root: str | Path | None = None,
                 clock: Callable[[], datetime] | None = None):
        self.province_ids = set(province_ids)
        self.audit_root = Path(audit_root) if audit_root else None
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.incidents: dict[str, Incident] = {}
        self._lock = threading.RLock()
        self._seen_alerts: set[str] = set()

    # -- audit plumbing -----------------------------------------------------

    def _audit(self, incident: Incident, actor: str, event: str, payload: dict) -> None:
        entry = AuditEntry(seq=len(incident.audit_log) + 1, at=self.clock(),
                           actor=actor, event=event, payload=payload)
        incident.audit_log.append(entry)
        if self.audit_root is not None:
            log_dir = self.audit_root / "incidents"
            log_dir.mkdir(parents=True, exist_ok=True)
            with open(log_dir / f"{incident.incident_id}.log.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")

    def _transition(self, incident: Incident, target: IncidentState, actor: str,
                    event: str, payload: dict) -> None:
        if target not in TRANSITIONS[incident.state]:
            raise StateError(f"cannot move {incident.incident_id} from "
                             f"{incident.state.value} to {target.value}")
        incident.state = target
        self._audit(incident, actor, event, {**payload, "state": target.value})

    # -- lifecycle ------------------------------------------------------------

    def open_incident(self, alert: Alert, actor: str = "system") -> Incident:
        alert.validate()
        with self._lock:
            if alert.alert_id in self._seen_alerts:
                raise DuplicateError(f"alert_id: incident already open for {alert.alert_id!r}",
                                     "alert_id")
            incident = Incident(incident_id=f"inc-{alert.alert_id}", alert=alert)
            self._seen_alerts.add(alert.alert_id)
            self.incidents[incident.incident_id] = incident
            self._audit(incident, actor, "opened",
                        {"alert": row_to_dict(alert), "state": incident.state.value})
            return incident

    def apply_assessment(self, incident: Incident, needs: NeedsEstimate,
                         prediction: ImpactPrediction | None,
                         affected_regency_ids: tuple[str, ...] = (),
                         affected_province_ids: frozenset[str] = frozenset(),
                         actor: str = "system") -> Incident:
        """Attach precomputed planning output and settle the post-assessment state."""
        if incident.state is not IncidentState.RECEIVED:
            raise StateError(f"assess requires state Received, not {incident.state.value}")
        incident.needs = needs
        incident.prediction = prediction
        incident.base_lack = needs.medic_lack
        incident.residual_lack = needs.medic_lack
        incident.affected_regency_ids = affected_regency_ids
        incident.affected_province_ids = affected_province_ids
        payload = {
            "needs": needs.to_dict(),
            "prediction": prediction.to_dict() if prediction else None,
            "affected_regency_ids": list(affected_regency_ids),
            "affected_province_ids": sorted(affected_province_ids),
        }
        if needs.medic_lack == 0:
            self._transition(incident, IncidentState.RESOLVED, actor, "assessed", payload)
        else:
            self._transition(incident, IncidentState.ASSESSED, actor, "assessed", payload)
        return incident

    def assess(self, incident: Incident, snapshot, standard, k: int = 3,
               actor: str = "system") -> Incident:
        """Run the planner against a warehouse snapshot and record the outcome."""
        if incident.state is not IncidentState.RECEIVED:
            raise StateError(f"assess requires state Received, not {incident.state.value}")
        plan: PlanResult = plan_for_alert(snapshot, incident.alert, standard, k=k)
        province_ids = frozenset(snapshot.regencies[rid].province_id
                                 for rid in plan.affected_regency_ids)
        return self.apply_assessment(incident, plan.needs, plan.prediction,
                                     plan.affected_regency_ids, province_ids, actor)

    def request_sos1(self, incident: Incident, capacities: Iterable[ProvinceCapacity],
                     province_centroids: dict[str, tuple[float, float]],
                     approved_by: str | None = None) -> tuple[DispatchRequest, ...]:
        """Dispatch the first SOS: nearest provinces first, national stock last.

        Requires a recorded operator approval; provinces already inside the
        affected area are not asked (their medics are the ones lacking).
        """
        if incident.state is not IncidentState.ASSESSED:
            raise StateError(f"SOS1 requires state Assessed, not {incident.state.value}")
        if incident.residual_lack <= 0:
            raise StateError("SOS1 requires a positive medical-team shortfall")
        if approved_by is None:
            raise ApprovalRequiredError("SOS1 dispatch requires operator approval")

        plan = self._sos1_plan(incident, capacities, province_centroids)
        self._transition(incident, IncidentState.AWAITING_SOS1_APPROVAL, approved_by,
                         "sos1_requested", {"residual_lack": incident.residual_lack})
        incident.dispatch_plan = plan
        self._transition(incident, IncidentState.SOS1_DISPATCHED, approved_by,
                         "sos1_dispatched",
                         {"approved_by": approved_by,
                          "plan": [{"origin": d.origin, "medics_requested": d.medics_requested}
                                   for d in plan]})
        return plan

    def _sos1_plan(self, incident: Incident, capacities: Iterable[ProvinceCapacity],
                   centroids: dict[str, tuple[float, float]]) -> tuple[DispatchRequest, ...]:
        epicenter = (incident.alert.epicenter_lat, incident.alert.epicenter_lon)

        def sort_key(cap: ProvinceCapacity) -> tuple[float, str]:
            lat, lon = centroids.get(cap.province_id, (0.0, 0.0))
            return (geo.haversine_km(epicenter[0], epicenter[1], lat, lon), cap.province_id)

        remaining = incident.residual_lack
        plan: list[DispatchRequest] = []
        for cap in sorted(capacities, key=sort_key):
            cap.validate()
            if cap.province_id in incident.affected_province_ids:
                continue
            if remaining <= 0:
                break
            ask = min(cap.medics_deployable, remaining)
            if ask > 0:
                plan.append(DispatchRequest(origin=cap.province_id, medics_requested=ask))
                remaining -= ask
        if remaining > 0:
            plan.append(DispatchRequest(origin=NATIONAL_ORIGIN, medics_requested=remaining))
        return tuple(plan)

    def record_pledge(self, incident: Incident, pledge: Pledge) -> Incident:
        stage_states = {1: IncidentState.SOS1_DISPATCHED, 2: IncidentState.SOS2_DISPATCHED}
        if incident.state not in stage_states.values():
            raise StateError(f"pledges need an open SOS stage, not {incident.state.value}")
        current_stage = 1 if incident.state is IncidentState.SOS1_DISPATCHED else 2
        if pledge.stage != current_stage:
            raise ValidationError(f"stage: pledge stage {pledge.stage} does not match open "
                                  f"stage {current_stage}", "stage")
        if pledge.incident_id != incident.incident_id:
            raise ValidationError("incident_id: pledge addressed to a different incident",
                                  "incident_id")
        if pledge.medics_pledged < 0:
            raise ValidationError("medics_pledged: must be >= 0", "medics_pledged")
        domestic = pledge.origin == NATIONAL_ORIGIN or pledge.origin in self.province_ids
        if pledge.stage == 1 and not domestic:
            raise ValidationError(f"origin: {pledge.origin!r} is not a province or national "
                                  "stock; stage-1 pledges are domestic", "origin")
        if pledge.stage == 2 and domestic:
            raise ValidationError(f"origin: {pledge.origin!r} is domestic; stage-2 pledges "
                                  "come from international institutions", "origin")
        if any(p.pledge_id == pledge.pledge_id for p in incident.pledges):
            raise DuplicateError(f"pledge_id: duplicate pledge {pledge.pledge_id!r}", "pledge_id")

        incident.pledges.append(pledge)
        incident.residual_lack = max(0, incident.base_lack - incident.pledged_total())
        self._audit(incident, pledge.origin, "pledge_recorded",
                    {"pledge": pledge.to_dict(), "residual_lack": incident.residual_lack})
        if incident.residual_lack == 0:
            self._transition(incident, IncidentState.RESOLVED, "system", "resolved",
                             {"residual_lack": 0})
        return incident

    def close_sos1(self, incident: Incident, actor: str = "system") -> Incident:
        if incident.state is not IncidentState.SOS1_DISPATCHED:
            raise StateError(f"close_sos1 requires SOS1Dispatched, not {incident.state.value}")
        self._transition(incident, IncidentState.SOS1_CLOSED, actor, "sos1_closed",
                         {"residual_lack": incident.residual_lack})
        if incident.residual_lack > 0:
            self._transition(incident, IncidentState.AWAITING_SOS2_APPROVAL, actor,
                             "sos2_requested", {"residual_lack": incident.residual_lack})
        else:
            self._transition(incident, IncidentState.RESOLVED, actor, "resolved",
                             {"residual_lack": 0})
        return incident

    def request_sos2(self, incident: Incident, approved_by: str | None = None) -> Incident:
        if incident.state is not IncidentState.AWAITING_SOS2_APPROVAL:
            raise StateError(f"SOS2 requires AwaitingSOS2Approval, not {incident.state.value}")
        if approved_by is None:
            raise ApprovalRequiredError("SOS2 dispatch requires operator approval")
        self._transition(incident, IncidentState.SOS2_DISPATCHED, approved_by,
                         "sos2_dispatched", {"approved_by": approved_by,
                                             "residual_lack": incident.residual_lack})
        return incident

    def declare_level(self, incident: Incident, level: int, actor: str) -> Incident:
        if isinstance(level, bool) or not isinstance(level, int) or not 1 <= level <= 4:
            raise ValidationError(f"level: {level!r} outside 1..4", "level")
        if incident.state is IncidentState.CLOSED:
            raise StateError("cannot declare a level on a closed incident")
        incident.declared_level = level
        self._audit(incident, actor, "level_declared", {"level": level})
        return incident

    def close_incident(self, incident: Incident, actor: str = "system") -> Incident:
        self._transition(incident, IncidentState.CLOSED, actor, "closed", {})
        return incident

    def get(self, incident_id: str) -> Incident | None:
        return self.incidents.get(incident_id)

    def list_incidents(self) -> list[Incident]:
        return sorted(self.incidents.values(),
                      key=lambda i: (i.alert.issued_at, i.incident_id), reverse=True)


def replay_audit(entries: Iterable[dict]) -> Incident:
    """Rebuild an incident purely from its audit log.

    Replays event semantics (not stored snapshots): pledges re-accumulate and
    the shortfall re-derives, so a replayed incident matching the live one is
    evidence the log is complete.
    """
    incident: Incident | None = None
    for raw in entries:
        event = raw["event"]
        payload = raw.get("payload", {})
        at = parse_ts(raw["at"], "at")
        entry = AuditEntry(seq=raw["seq"], at=at, actor=raw["actor"], event=event,
                           payload=payload)
        if event == "opened":
            alert = row_from_dict(Alert, payload["alert"])
            incident = Incident(incident_id=f"inc-{alert.alert_id}", alert=alert)
        elif incident is None:
            raise ValidationError("audit log does not start with an 'opened' event", "event")
        elif event == "assessed":
            incident.needs = NeedsEstimate.from_dict(payload["needs"])
            incident.prediction = (ImpactPrediction.from_dict(payload["prediction"])
                                   if payload.get("prediction") else None)
            incident.base_lack = incident.needs.medic_lack
            incident.residual_lack = incident.needs.medic_lack
            incident.affected_regency_ids = tuple(payload.get("affected_regency_ids", ()))
            incident.affected_province_ids = frozenset(payload.get("affected_province_ids", ()))
            incident.state = IncidentState(payload["state"])
        elif event == "sos1_requested":
            incident.state = IncidentState.AWAITING_SOS1_APPROVAL
        elif event == "sos1_dispatched":
            incident.dispatch_plan = tuple(
                DispatchRequest(origin=d["origin"], medics_requested=d["medics_requested"])
                for d in payload.get("plan", ()))
            incident.state = IncidentState.SOS1_DISPATCHED
        elif event == "pledge_recorded":
            data = dict(payload["pledge"])
            data["pledged_at"] = parse_ts(data["pledged_at"], "pledged_at")
            incident.pledges.append(Pledge(**data))
            incident.residual_lack = max(0, incident.base_lack - incident.pledged_total())
        elif event == "sos1_closed":
            incident.state = IncidentState.SOS1_CLOSED
        elif event == "sos2_requested":
            incident.state = IncidentState.AWAITING_SOS2_APPROVAL
        elif event == "sos2_dispatched":
            incident.state = IncidentState.SOS2_DISPATCHED
        elif event == "resolved":
            incident.state = IncidentState.RESOLVED
        elif event == "level_declared":
            incident.declared_level = payload["level"]
        elif event == "closed":
            incident.state = IncidentState.CLOSED
        else:
            raise ValidationError(f"event: unknown audit event {event!r}", "event")
        if incident is not None:
            incident.audit_log.append(entry)
    if incident is None:
        raise ValidationError("audit log is empty", "event")
    return incident


def load_capacities(path: str | Path) -> list[ProvinceCapacity]:
    """Read <root>/capacities.jsonl: one ProvinceCapacity per line."""
    rows = []
    path = Path(path)
    if not path.exists():
        return rows
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            cap = ProvinceCapacity(province_id=data["province_id"],
                                   medics_deployable=data["medics_deployable"])
            cap.validate()
            rows.append(cap)
    return rows


def load_incident_logs(root: str | Path) -> list[Incident]:
    """Rebuild every persisted incident by replaying its log file."""
    log_dir = Path(root) / "incidents"
    incidents = []
    if not log_dir.exists():
        return incidents
    for path in sorted(log_dir.glob("*.log.jsonl")):
        with open(path, encoding="utf-8") as fh:
            entries = [json.loads(line) for line in fh if line.strip()]
        if entries:
            incidents.append(replay_audit(entries))
    return incidents
