"""Command-line front end.

Exit codes: 0 success, 1 validation problem (including bad usage), 2 I/O
problem. The data directory defaults to ./data; --root or QDSS_DATA override.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import etl, feeds, gateway, olap, seed
from .errors import NotFoundError, QdssError, StateError, ValidationError
from .escalation import IncidentEngine, Pledge, load_capacities, load_incident_logs
from .model import QuakeEvent, row_from_dict
from .planner import load_standards, plan_for_alert
from .warehouse import TABLE_TYPES, Warehouse, data_root


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (validation) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdss", description=__doc__)
    parser.add_argument("--root", default=None, help="data directory (default ./data or QDSS_DATA)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_seed = sub.add_parser("seed", help="load seed data into the warehouse")
    p_seed.add_argument("--demo", action="store_true",
                        help="write the full demo dataset (catalog + synthetic + feeds)")
    p_seed.add_argument("--synthetic", type=int, default=50,
                        help="synthetic quake count for --demo")
    p_seed.add_argument("--file", help="JSONL rows to load; lines may carry a 'kind' field "
                                       "(default quake)")

    p_etl = sub.add_parser("etl", help="run deferred extraction into the warehouse")
    p_etl.add_argument("action", choices=["run"])
    p_etl.add_argument("--source", default=None, help="run a single registered source")

    p_olap = sub.add_parser("olap", help="build a cube and render a report")
    p_olap.add_argument("--measure", action="append", default=None,
                        help=f"one of {', '.join(olap.MEASURES)} (repeatable)")
    p_olap.add_argument("--by", action="append", default=None,
                        help="dimension, e.g. geography:province, time:year, magnitude_band:1.0")
    p_olap.add_argument("--slice", action="append", default=None,
                        help="restriction, e.g. time:2004 or geography:aceh")
    p_olap.add_argument("--format", default="text", choices=["text", "csv", "json"])

    p_plan = sub.add_parser("plan", help="compute the resource plan for an alert file")
    p_plan.add_argument("--alert", required=True, help="path to a one-object alert JSON file")
    p_plan.add_argument("--k", type=int, default=3, help="neighbors for impact prediction")
    p_plan.add_argument("--format", default="json", choices=["json", "text"])

    p_sim = sub.add_parser("simulate", help="generate (and optionally replay) an alert script")
    p_sim.add_argument("--rate", type=float, required=True, help="alerts per day, 5..30")
    p_sim.add_argument("--days", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=42)
    p_sim.add_argument("--speedup", type=float, default=None,
                       help="replay the script this many times faster than real time")
    p_sim.add_argument("--out", default=None, help="script path (default <root>/feeds/alerts.jsonl)")
    p_sim.add_argument("--post", default=None, help="gateway base URL to deliver alerts to")
    p_sim.add_argument("--token", default=None, help="bearer token for --post")

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--port", type=int, default=None)

    p_inc = sub.add_parser("incident", help="drive the escalation protocol locally")
    p_inc.add_argument("action", choices=["list", "show", "open", "assess", "approve-sos1",
                                          "pledge", "close-sos1", "approve-sos2",
                                          "declare-level"])
    p_inc.add_argument("incident_id", nargs="?", default=None)
    p_inc.add_argument("--alert", help="alert JSON file for 'open'")
    p_inc.add_argument("--actor", default="operator")
    p_inc.add_argument("--origin", help="pledge origin (province id, national, or org name)")
    p_inc.add_argument("--medics", type=int, default=0, help="pledged medical teams")
    p_inc.add_argument("--level", type=int, help="declared disaster level 1..4")
    return parser


def _emit(payload) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def cmd_seed(args) -> int:
    root = data_root(args.root)
    if args.demo:
        seed.write_demo_data(root, synthetic=args.synthetic)
        wh = Warehouse.load(root, attach=False)
        _emit({"root": str(root), "rows": wh.snapshot().row_counts()})
        return 0
    if not args.file:
        raise ValidationError("seed: pass --demo or --file", "file")
    try:
        wh = Warehouse.load(root)
    except FileNotFoundError:
        wh = Warehouse(root=root)
    if not wh.snapshot().stations:
        seed.load_dimensions(wh)
    inserted = 0
    with open(args.file, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            kind = data.pop("kind", "quake")
            table = {"quake": "quakes", "casualty": "casualties"}.get(kind, kind)
            if table not in TABLE_TYPES:
                raise ValidationError(f"kind: unknown record kind {kind!r}", "kind")
            wh.insert(table, row_from_dict(TABLE_TYPES[table], data))
            inserted += 1
    wh.flush()
    _emit({"root": str(root), "inserted": inserted})
    return 0


def cmd_etl(args) -> int:
    root = data_root(args.root)
    wh = Warehouse.load(root)
    sources = etl.load_sources(root)
    results = etl.run_etl(wh, sources, only=args.source, base_dir=root)
    _emit([dataclasses.asdict(result) for result in results])
    return 0


def cmd_olap(args) -> int:
    wh = Warehouse.load(data_root(args.root), attach=False)
    cube = olap.run_query(wh.snapshot(), args.measure or ["quake_count"],
                          args.by or [], args.slice or [])
    sys.stdout.write(olap.render_report(cube, args.format))
    if args.format == "json":
        sys.stdout.write("\n")
    return 0


def cmd_plan(args) -> int:
    root = data_root(args.root)
    wh = Warehouse.load(root, attach=False)
    alert = feeds.parse_alert(Path(args.alert).read_text(encoding="utf-8"))
    standard = load_standards(root)
    result = plan_for_alert(wh.snapshot(), alert, standard, k=args.k)
    if args.format == "json":
        _emit(result.to_dict())
        return 0
    needs = result.needs
    print(f"affected citizens (A_c): {needs.a_c}")
    print(f"medical teams needed:    {needs.medics_needed}")
    print(f"medical teams present:   {needs.medics_available}")
    print(f"medical team lack:       {needs.medic_lack}")
    print(f"displaced:               {needs.displaced}")
    print(f"tents: {needs.tents}  sanitation: {needs.sanitation_units}  "
          f"food shelters: {needs.food_shelters}")
    print(f"rice (kg): {needs.rice_kg}  baby feed (kg): {needs.baby_feed_kg}  "
          f"blankets: {needs.blankets}")
    print(f"volunteers: {needs.volunteers_national}")
    print(f"refugee sites: {', '.join(needs.refugee_sites) or '-'}")
    print(f"estimated loss: {needs.total_loss_estimate}")
    checklist = " ".join(f"{k}={'yes' if v else 'NO'}"
                         for k, v in needs.category_checklist.items())
    print(f"checklist: {checklist}")
    if result.prediction:
        p = result.prediction
        print(f"predicted deaths: {p.predicted_deaths:.1f}  injured: {p.predicted_injured:.1f}  "
              f"level: {p.predicted_level}")
    return 0


def cmd_simulate(args) -> int:
    root = data_root(args.root)
    script = feeds.generate_script(args.rate, args.days, args.seed)
    out = Path(args.out) if args.out else root / "feeds" / "alerts.jsonl"
    feeds.write_script(script, out)
    print(f"wrote {len(script)} alerts to {out}", file=sys.stderr)
    if args.speedup is None:
        return 0

    if args.post:
        import requests

        headers = {"Authorization": f"Bearer {args.token}"} if args.token else {}

        def deliver(alert):
            response = requests.post(f"{args.post.rstrip('/')}/alerts",
                                     json=json.loads(feeds.serialize_alert(alert)),
                                     headers=headers, timeout=10)
            print(f"{alert.alert_id} -> {response.status_code}")
    else:
        def deliver(alert):
            print(feeds.serialize_alert(alert))

    delivered = feeds.replay(script, args.speedup, deliver)
    print(f"delivered {delivered} alerts", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    gateway.serve_forever(data_root(args.root), port=args.port)
    return 0


def cmd_incident(args) -> int:
    root = data_root(args.root)
    wh = Warehouse.load(root, attach=False)
    snap = wh.snapshot()
    engine = IncidentEngine(province_ids=set(snap.provinces), audit_root=root)
    for incident in load_incident_logs(root):
        engine.incidents[incident.incident_id] = incident
        engine._seen_alerts.add(incident.alert_id)

    def require_incident():
        if not args.incident_id:
            raise ValidationError("incident_id: required for this action", "incident_id")
        incident = engine.get(args.incident_id)
        if incident is None:
            raise NotFoundError(f"incident {args.incident_id!r} not found")
        return incident

    if args.action == "list":
        _emit([{"incident_id": i.incident_id, "state": i.state.value,
                "residual_lack": i.residual_lack} for i in engine.list_incidents()])
        return 0
    if args.action == "open":
        if not args.alert:
            raise ValidationError("alert: --alert FILE required for 'open'", "alert")
        alert = feeds.parse_alert(Path(args.alert).read_text(encoding="utf-8"))
        incident = engine.open_incident(alert, actor=args.actor)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value})
        return 0

    incident = require_incident()
    if args.action == "show":
        _emit(incident.to_dict())
    elif args.action == "assess":
        engine.assess(incident, snap, load_standards(root), actor=args.actor)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value,
               "residual_lack": incident.residual_lack})
    elif args.action == "approve-sos1":
        capacities = load_capacities(root / "capacities.jsonl")
        centroids = {p.province_id: (p.centroid_lat, p.centroid_lon)
                     for p in snap.provinces.values()}
        plan = engine.request_sos1(incident, capacities, centroids, approved_by=args.actor)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value,
               "plan": [{"origin": d.origin, "medics_requested": d.medics_requested}
                        for d in plan]})
    elif args.action == "pledge":
        if not args.origin:
            raise ValidationError("origin: --origin required for 'pledge'", "origin")
        stage = 1 if incident.state.value == "SOS1Dispatched" else 2
        pledge = Pledge(pledge_id=f"plg-{incident.incident_id}-{len(incident.pledges) + 1}",
                        incident_id=incident.incident_id, origin=args.origin,
                        medics_pledged=args.medics, stage=stage,
                        pledged_at=datetime.now(timezone.utc))
        engine.record_pledge(incident, pledge)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value,
               "residual_lack": incident.residual_lack})
    elif args.action == "close-sos1":
        engine.close_sos1(incident, actor=args.actor)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value})
    elif args.action == "approve-sos2":
        engine.request_sos2(incident, approved_by=args.actor)
        _emit({"incident_id": incident.incident_id, "state": incident.state.value})
    elif args.action == "declare-level":
        engine.declare_level(incident, args.level, actor=args.actor)
        _emit({"incident_id": incident.incident_id, "declared_level": incident.declared_level})
    return 0


_COMMANDS = {
    "seed": cmd_seed,
    "etl": cmd_etl,
    "olap": cmd_olap,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "serve": cmd_serve,
    "incident": cmd_incident,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (StateError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QdssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
