/**
 * Typed client for the gateway HTTP API. The console holds no authoritative
 * data: everything rendered comes back through these calls.
 */

export interface AlertWire {
  alert_id: string;
  issued_at: string;
  magnitude: number;
  epicenter_lat: number;
  epicenter_lon: number;
  depth_km: number;
  radius_km: number;
  high_risk: boolean;
}

export interface IncidentSummary {
  incident_id: string;
  alert_id: string;
  issued_at: string;
  magnitude: number;
  high_risk: boolean;
  state: string;
  declared_level: number | null;
  predicted_level: number | null;
  residual_lack: number;
}

export interface NeedsTable {
  a_c: number;
  medics_needed: number;
  medics_available: number;
  medic_lack: number;
  displaced: number;
  tents: number;
  sanitation_units: number;
  food_shelters: number;
  blankets: number;
  rice_kg: number;
  baby_feed_kg: number;
  volunteers_national: number;
  refugee_sites: string[];
  total_loss_estimate: number;
  category_checklist: Record<string, boolean>;
}

export interface Prediction {
  predicted_deaths: number;
  predicted_injured: number;
  predicted_level: number;
  neighbors: { quake_id: string; distance: number; weight: number }[];
}

export interface PledgeWire {
  pledge_id: string;
  incident_id: string;
  origin: string;
  medics_pledged: number;
  stage: number;
  pledged_at: string;
}

export interface AuditEntry {
  seq: number;
  at: string;
  actor: string;
  event: string;
  payload: Record<string, unknown>;
}

export interface IncidentDetail {
  incident_id: string;
  alert: AlertWire;
  state: string;
  needs: NeedsTable | null;
  prediction: Prediction | null;
  declared_level: number | null;
  pledges: PledgeWire[];
  residual_lack: number;
  affected_regency_ids: string[];
  dispatch_plan: { origin: string; medics_requested: number }[];
  audit_log: AuditEntry[];
}

export interface OlapDoc {
  measures: string[];
  dimensions: string[];
  cells: { coords: string[]; values: Record<string, number> }[];
  grand_total: Record<string, number>;
  series: { labels: string[]; datasets: { measure: string; values: number[] }[] };
}

export type IncidentAction =
  | "assess"
  | "approve-sos1"
  | "pledge"
  | "close-sos1"
  | "approve-sos2"
  | "declare-level";

/** Server rejected the request; message carries the server's reason. */
export class GatewayError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export interface OlapQuery {
  measures: string[];
  by: string[];
  slices: string[];
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string | null = null,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private headers(): Record<string, string> {
    const out: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) out["Authorization"] = `Bearer ${this.token}`;
    return out;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let reason = text;
      try {
        reason = (JSON.parse(text) as { error?: string }).error ?? text;
      } catch {
        /* non-json error body */
      }
      throw new GatewayError(response.status, reason);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/health");
  }

  listIncidents(): Promise<IncidentSummary[]> {
    return this.request("GET", "/incidents");
  }

  getIncident(id: string): Promise<IncidentDetail> {
    return this.request("GET", `/incidents/${id}`);
  }

  postAlert(alert: AlertWire): Promise<{ incident_id: string; alert_id: string }> {
    return this.request("POST", "/alerts", alert);
  }

  act(id: string, action: IncidentAction, body: Record<string, unknown> = {}):
      Promise<IncidentDetail> {
    return this.request("POST", `/incidents/${id}/${action}`, body);
  }

  olapReport(query: OlapQuery): Promise<OlapDoc> {
    const params = new URLSearchParams();
    for (const m of query.measures) params.append("measure", m);
    for (const b of query.by) params.append("by", b);
    for (const s of query.slices) params.append("slice", s);
    params.set("format", "json");
    return this.request("GET", `/reports/olap?${params.toString()}`);
  }
}
