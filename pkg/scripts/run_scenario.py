#!/usr/bin/env python3
"""Walk the whole decision loop once, end to end, against a scratch data dir.

Seeds the warehouse and feeds, starts the gateway on a free port, injects one
high-risk alert, assesses it, dispatches both SOS stages with partial pledges,
and prints the needs table, the prediction, the dispatch plan and the final
audit trail.

Usage: python scripts/run_scenario.py [--root DIR] [--keep]
"""

import argparse
import json
import shutil
import tempfile
import threading
from pathlib import Path

import requests

from qdss import gateway, seed

AUTH = {"Authorization": "Bearer operator-token"}

ALERT = {
    "alert_id": "scenario-1",
    "issued_at": "2026-03-05T06:00:00Z",
    "magnitude": 8.6,
    "epicenter_lat": 5.4,
    "epicenter_lon": 95.4,
    "depth_km": 22.0,
    "radius_km": 150.0,
    "high_risk": True,
}


def banner(text: str) -> None:
    print(f"\n=== {text} " + "=" * max(0, 60 - len(text)))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default=None, help="data dir (default: fresh temp dir)")
    parser.add_argument("--keep", action="store_true", help="keep the temp data dir")
    args = parser.parse_args()

    scratch = None
    if args.root:
        root = Path(args.root)
    else:
        scratch = Path(tempfile.mkdtemp(prefix="qdss-scenario-"))
        root = scratch / "data"

    banner("seeding")
    seed.write_demo_data(root, synthetic=60, catalog_casualties=False)
    print(f"data directory: {root}")

    server, _app = gateway.serve(root, port=0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    print(f"gateway: {base}")

    try:
        banner("alert intake")
        created = requests.post(f"{base}/alerts", json=ALERT, headers=AUTH).json()
        print(json.dumps(created, indent=2))
        incident_id = created["incident_id"]

        banner("assessment")
        detail = requests.post(f"{base}/incidents/{incident_id}/assess",
                               json={}, headers=AUTH).json()
        needs = detail["needs"]
        for key in ("a_c", "medics_needed", "medics_available", "medic_lack", "displaced",
                    "tents", "sanitation_units", "food_shelters", "blankets", "rice_kg",
                    "baby_feed_kg", "volunteers_national", "total_loss_estimate"):
            print(f"  {key:22} {needs[key]}")
        print(f"  refugee_sites          {', '.join(needs['refugee_sites'])}")
        print(f"  checklist              "
              + " ".join(k for k, v in needs["category_checklist"].items() if v))
        if detail["prediction"]:
            p = detail["prediction"]
            print(f"  predicted deaths       {p['predicted_deaths']:.0f}")
            print(f"  predicted injured      {p['predicted_injured']:.0f}")
            print(f"  predicted level        {p['predicted_level']}")

        banner("first SOS (near provinces + national)")
        detail = requests.post(f"{base}/incidents/{incident_id}/approve-sos1",
                               json={"actor": "duty-chief"}, headers=AUTH).json()
        for line in detail["dispatch_plan"]:
            print(f"  ask {line['origin']:16} for {line['medics_requested']} teams")
        first = detail["dispatch_plan"][0]
        partial = max(1, first["medics_requested"] // 2)
        requests.post(f"{base}/incidents/{incident_id}/pledge",
                      json={"origin": first["origin"], "medics": partial}, headers=AUTH)
        print(f"  pledge: {first['origin']} sends {partial}")
        detail = requests.post(f"{base}/incidents/{incident_id}/close-sos1",
                               json={}, headers=AUTH).json()
        print(f"  stage closed, state {detail['state']}, still short "
              f"{detail['residual_lack']}")

        banner("second SOS (international)")
        requests.post(f"{base}/incidents/{incident_id}/approve-sos2",
                      json={"actor": "duty-chief"}, headers=AUTH)
        detail = requests.get(f"{base}/incidents/{incident_id}").json()
        remaining = detail["residual_lack"]
        detail = requests.post(f"{base}/incidents/{incident_id}/pledge",
                               json={"origin": "world-health-corps",
                                     "medics": remaining}, headers=AUTH).json()
        print(f"  world-health-corps sends {remaining}; state {detail['state']}")
        requests.post(f"{base}/incidents/{incident_id}/declare-level",
                      json={"level": 4, "actor": "minister"}, headers=AUTH)

        banner("audit trail")
        detail = requests.get(f"{base}/incidents/{incident_id}").json()
        for entry in detail["audit_log"]:
            state = entry["payload"].get("state", "")
            print(f"  {entry['seq']:>2} {entry['at']} {entry['actor']:<18} "
                  f"{entry['event']:<18} {state}")

        banner("deaths by province, 2004 (report endpoint)")
        print(requests.get(f"{base}/reports/olap", params={
            "measure": "deaths", "by": "geography:province",
            "slice": "time:2004", "format": "text"}).text)
    finally:
        server.shutdown()
        if scratch and not args.keep:
            shutil.rmtree(scratch, ignore_errors=True)
        elif scratch:
            print(f"\nkept: {scratch}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
