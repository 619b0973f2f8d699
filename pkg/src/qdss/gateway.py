"""HTTP gateway: the one door to queries, reports, planning and escalation.

Plain threaded HTTP with JSON bodies. Two permission classes: read (query
endpoints, the default for anonymous callers) and operate (every POST), taken
from a static token table in <root>/config.json. Query responses serialize
deterministically, so identical warehouse snapshots produce identical bytes.
Every successful mutating request appends one line to <root>/gateway_audit.jsonl.

Routes:

    GET  /health
    GET  /quakes?year=&start=&end=&regency=&min_mag=&max_mag=
    GET  /reports/olap?measure=&by=&slice=&format=
    GET  /incidents
    GET  /incidents/{id}
    POST /alerts
    POST /incidents/{id}/assess
    POST /incidents/{id}/approve-sos1
    POST /incidents/{id}/pledge
    POST /incidents/{id}/close-sos1
    POST /incidents/{id}/approve-sos2
    POST /incidents/{id}/declare-level
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import __version__, feeds, olap
from .errors import (
    ApprovalRequiredError,
    DuplicateError,
    NotFoundError,
    QdssError,
    StateError,
    ValidationError,
)
from .escalation import IncidentEngine, Pledge, load_capacities, load_incident_logs
from .model import format_ts, parse_ts, row_to_dict
from .planner import load_standards
from .warehouse import FactFilter, StagingStore, Warehouse, data_root


def canonical_json(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True, slots=True)
class ApiSession:
    """Resolved caller identity: anonymous callers read, tokens say the rest."""

    token: str | None
    permission: str  # "read" or "operate"

    @property
    def can_read(self) -> bool:
        return True  # operate implies read; anonymous callers read query endpoints

    @property
    def can_operate(self) -> bool:
        return self.permission == "operate"


class GatewayApp:
    """Request-independent application state and handlers."""

    def __init__(self, root: str | os.PathLike | None = None):
        self.root = data_root(root)
        self.warehouse = Warehouse.load(self.root)
        self.staging = StagingStore(self.root)
        self.standard = load_standards(self.root)
        self.capacities = load_capacities(self.root / "capacities.jsonl")
        self.config = self._load_config()
        self.engine = IncidentEngine(
            province_ids=set(self.warehouse.snapshot().provinces),
            audit_root=self.root)
        for incident in load_incident_logs(self.root):
            self.engine.incidents[incident.incident_id] = incident
            self.engine._seen_alerts.add(incident.alert_id)
        self._mutate = threading.Lock()

    def _load_config(self) -> dict:
        path = self.root / "config.json"
        if not path.exists():
            return {"port": 8642, "tokens": {}, "thresholds": {}}
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    @property
    def port(self) -> int:
        return int(os.environ.get("QDSS_PORT", self.config.get("port", 8642)))

    def session(self, token: str | None) -> ApiSession:
        """Anonymous callers read; tokens grant what the table says."""
        if token is None:
            return ApiSession(None, "read")
        return ApiSession(token, self.config.get("tokens", {}).get(token, "read"))

    def _province_centroids(self) -> dict[str, tuple[float, float]]:
        snap = self.warehouse.snapshot()
        return {p.province_id: (p.centroid_lat, p.centroid_lon)
                for p in snap.provinces.values()}

    def _gateway_audit(self, actor: str, method: str, path: str, status: int) -> None:
        line = canonical_json({
            "at": format_ts(datetime.now(timezone.utc)),
            "actor": actor,
            "method": method,
            "path": path,
            "status": status,
        }).decode("utf-8")
        with open(self.root / "gateway_audit.jsonl", "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    # -- GET handlers -------------------------------------------------------

    def health(self) -> dict:
        return {"status": "ok", "version": __version__}

    def quakes(self, params: dict[str, list[str]]) -> list[dict]:
        start = end = None
        if "year" in params:
            year = int(params["year"][0])
            start = datetime(year, 1, 1, tzinfo=timezone.utc)
            end = datetime(year, 12, 31, 23, 59, 59, tzinfo=timezone.utc)
        if "start" in params:
            start = parse_ts(params["start"][0], "start")
        if "end" in params:
            end = parse_ts(params["end"][0], "end")
        regencies = frozenset(params["regency"]) if "regency" in params else None
        flt = FactFilter(
            start=start, end=end, regency_ids=regencies,
            min_magnitude=float(params["min_mag"][0]) if "min_mag" in params else None,
            max_magnitude=float(params["max_mag"][0]) if "max_mag" in params else None)
        return [row_to_dict(q) for q in self.warehouse.query_facts(flt)]

    def olap_report(self, params: dict[str, list[str]]) -> tuple[str, str]:
        measures = params.get("measure", ["quake_count"])
        by = params.get("by", [])
        slices = params.get("slice", [])
        fmt = params.get("format", ["json"])[0]
        cube = olap.run_query(self.warehouse.snapshot(), measures, by, slices)
        content_type = {"json": "application/json", "csv": "text/csv",
                        "text": "text/plain"}.get(fmt)
        if content_type is None:
            raise ValidationError(f"format: {fmt!r} not in ('text', 'csv', 'json')", "format")
        return olap.render_report(cube, fmt), content_type

    def incident_summaries(self) -> list[dict]:
        out = []
        for inc in self.engine.list_incidents():
            out.append({
                "incident_id": inc.incident_id,
                "alert_id": inc.alert_id,
                "issued_at": format_ts(inc.alert.issued_at),
                "magnitude": inc.alert.magnitude,
                "high_risk": inc.alert.high_risk,
                "state": inc.state.value,
                "declared_level": inc.declared_level,
                "predicted_level": inc.prediction.predicted_level if inc.prediction else None,
                "residual_lack": inc.residual_lack,
            })
        return out

    def incident_detail(self, incident_id: str) -> dict:
        incident = self.engine.get(incident_id)
        if incident is None:
            raise NotFoundError(f"incident {incident_id!r} not found")
        return incident.to_dict()

    # -- POST handlers ------------------------------------------------------

    def post_alert(self, body: dict, actor: str) -> dict:
        alert = feeds.parse_alert(json.dumps(body))
        thresholds = self.config.get("thresholds", {})
        snap = self.warehouse.snapshot()
        computed = feeds.compute_high_risk(
            alert.magnitude, (alert.epicenter_lat, alert.epicenter_lon), alert.radius_km,
            snap.regencies.values(),
            magnitude_threshold=thresholds.get("high_risk_magnitude",
                                               feeds.DEFAULT_HIGH_RISK_MAGNITUDE),
            population_threshold=thresholds.get("high_risk_population",
                                                feeds.DEFAULT_HIGH_RISK_POPULATION))
        if computed != alert.high_risk:
            alert = replace(alert, high_risk=computed)
        self.staging.record_alert(alert)
        incident = self.engine.open_incident(alert, actor=actor)
        return {"incident_id": incident.incident_id, "alert_id": alert.alert_id,
                "high_risk": alert.high_risk, "state": incident.state.value}

    def incident_action(self, incident_id: str, action: str, body: dict, actor: str) -> dict:
        incident = self.engine.get(incident_id)
        if incident is None:
            raise NotFoundError(f"incident {incident_id!r} not found")
        if action == "assess":
            self.engine.assess(incident, self.warehouse.snapshot(), self.standard,
                               k=int(body.get("k", 3)), actor=actor)
        elif action == "approve-sos1":
            self.engine.request_sos1(incident, self.capacities, self._province_centroids(),
                                     approved_by=actor)
        elif action == "pledge":
            stage = 1 if incident.state.value == "SOS1Dispatched" else 2
            pledge = Pledge(
                pledge_id=body.get("pledge_id", f"plg-{incident_id}-{len(incident.pledges) + 1}"),
                incident_id=incident_id,
                origin=str(body.get("origin", "")),
                medics_pledged=int(body.get("medics", 0)),
                stage=int(body.get("stage", stage)),
                pledged_at=datetime.now(timezone.utc))
            self.engine.record_pledge(incident, pledge)
        elif action == "close-sos1":
            self.engine.close_sos1(incident, actor=actor)
        elif action == "approve-sos2":
            self.engine.request_sos2(incident, approved_by=actor)
        elif action == "declare-level":
            self.engine.declare_level(incident, body.get("level"), actor=actor)
        else:
            raise NotFoundError(f"unknown incident action {action!r}")
        return incident.to_dict()


class _Handler(BaseHTTPRequestHandler):
    server_version = "qdss"
    app: GatewayApp  # set by serve()

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _token(self) -> str | None:
        header = self.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            return header[len("Bearer "):].strip()
        return None

    def _send(self, status: int, body: bytes, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Authorization")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        self._send(status, canonical_json(payload))

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def do_OPTIONS(self):  # CORS preflight for the browser console
        self._send(204, b"", "text/plain")

    def do_GET(self):
        app = self.app
        url = urlparse(self.path)
        params = parse_qs(url.query)
        try:
            if url.path == "/health":
                self._send_json(200, app.health())
            elif url.path == "/quakes":
                self._send_json(200, app.quakes(params))
            elif url.path == "/reports/olap":
                document, content_type = app.olap_report(params)
                self._send(200, document.encode("utf-8"), content_type)
            elif url.path == "/incidents":
                self._send_json(200, app.incident_summaries())
            elif url.path.startswith("/incidents/"):
                self._send_json(200, app.incident_detail(url.path.split("/", 2)[2]))
            else:
                self._error(404, f"no route {url.path}")
        except NotFoundError as exc:
            self._error(404, str(exc))
        except ValidationError as exc:
            self._error(400, str(exc))
        except QdssError as exc:
            self._error(500, str(exc))

    def do_POST(self):
        app = self.app
        url = urlparse(self.path)
        if not app.session(self._token()).can_operate:
            self._error(403, "operate permission required")
            return
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8")) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            self._error(400, f"body: invalid JSON: {exc.msg}")
            return
        actor = str(body.get("actor") or "operator")
        try:
            with app._mutate:
                if url.path == "/alerts":
                    result = app.post_alert(body, actor)
                    status = 201
                else:
                    parts = url.path.strip("/").split("/")
                    if len(parts) == 3 and parts[0] == "incidents":
                        result = app.incident_action(parts[1], parts[2], body, actor)
                        status = 200
                    else:
                        self._error(404, f"no route {url.path}")
                        return
                app._gateway_audit(actor, "POST", url.path, status)
            self._send_json(status, result)
        except NotFoundError as exc:
            self._error(404, str(exc))
        except (ApprovalRequiredError, StateError) as exc:
            self._error(409, str(exc))
        except DuplicateError as exc:
            self._error(409, str(exc))
        except ValidationError as exc:
            self._error(400, str(exc))
        except QdssError as exc:
            self._error(500, str(exc))


def serve(root: str | os.PathLike | None = None, port: int | None = None
          ) -> tuple[ThreadingHTTPServer, GatewayApp]:
    """Bind the gateway; port 0 picks a free one. Caller runs serve_forever."""
    app = GatewayApp(root)
    handler = type("BoundHandler", (_Handler,), {"app": app})
    chosen = app.port if port is None else port
    server = ThreadingHTTPServer(("127.0.0.1", chosen), handler)
    return server, app


def serve_forever(root: str | os.PathLike | None = None, port: int | None = None) -> None:
    server, app = serve(root, port)
    host, bound_port = server.server_address[:2]
    print(f"gateway listening on http://{host}:{bound_port} (data: {app.root})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
