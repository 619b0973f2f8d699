/**
 * View-state derivation. Pure functions only: the console's screen is always
 * a function of the latest gateway responses, never of local bookkeeping.
 */

import type { IncidentDetail, IncidentSummary, OlapDoc, OlapQuery } from "./api.js";

export interface ConsoleViewState {
  alertInbox: IncidentSummary[];
  activeIncident: IncidentDetail | null;
  olapQuery: OlapQuery;
  offline: boolean;
}

export function initialViewState(): ConsoleViewState {
  return {
    alertInbox: [],
    activeIncident: null,
    olapQuery: { measures: ["deaths"], by: ["geography:province"], slices: [] },
    offline: false,
  };
}

/** Inbox order: newest alert first, id as the deterministic tiebreak. */
export function sortInbox(summaries: IncidentSummary[]): IncidentSummary[] {
  return [...summaries].sort((a, b) => {
    if (a.issued_at !== b.issued_at) return a.issued_at < b.issued_at ? 1 : -1;
    return a.incident_id < b.incident_id ? 1 : -1;
  });
}

export const ACTIONS = [
  "assess",
  "approve-sos1",
  "pledge",
  "close-sos1",
  "approve-sos2",
  "declare-level",
] as const;

export type ActionName = (typeof ACTIONS)[number];

/**
 * Mirror of the escalation graph: a button is enabled exactly when the
 * incident state admits the transition. Anything else renders disabled with
 * the reason the server would give.
 */
export function enabledActions(incident: IncidentDetail): Set<ActionName> {
  const enabled = new Set<ActionName>();
  switch (incident.state) {
    case "Received":
      enabled.add("assess");
      break;
    case "Assessed":
      if (incident.residual_lack > 0) enabled.add("approve-sos1");
      break;
    case "SOS1Dispatched":
      enabled.add("pledge");
      enabled.add("close-sos1");
      break;
    case "AwaitingSOS2Approval":
      enabled.add("approve-sos2");
      break;
    case "SOS2Dispatched":
      enabled.add("pledge");
      break;
  }
  if (incident.state !== "Closed") enabled.add("declare-level");
  return enabled;
}

export function disabledReason(incident: IncidentDetail, action: ActionName): string {
  if (enabledActions(incident).has(action)) return "";
  if (action === "approve-sos1" && incident.state === "Assessed") {
    return "no medical-team shortfall to escalate";
  }
  return `not available in state ${incident.state}`;
}

/** Pledge stage implied by the open SOS stage, or null when pledges are closed. */
export function pledgeStage(incident: IncidentDetail): 1 | 2 | null {
  if (incident.state === "SOS1Dispatched") return 1;
  if (incident.state === "SOS2Dispatched") return 2;
  return null;
}

export function levelBadge(incident: IncidentSummary | IncidentDetail): string {
  const declared = incident.declared_level;
  const predicted =
    "predicted_level" in incident
      ? incident.predicted_level
      : (incident.prediction?.predicted_level ?? null);
  if (declared !== null && declared !== undefined) return `L${declared} (declared)`;
  if (predicted !== null && predicted !== undefined) return `L${predicted} (predicted)`;
  return "unrated";
}

// ---- OLAP exploration ------------------------------------------------------

const DRILL: Record<string, string> = {
  "geography:province": "geography:regency",
  "time:year": "time:month",
  "time:month": "time:day",
};
const ROLL: Record<string, string> = Object.fromEntries(
  Object.entries(DRILL).map(([coarse, fine]) => [fine, coarse]),
);

export function canDrillDown(dimension: string): boolean {
  return dimension in DRILL;
}

export function canRollUp(dimension: string): boolean {
  return dimension in ROLL;
}

export function drillDown(query: OlapQuery, dimension: string): OlapQuery {
  const finer = DRILL[dimension];
  if (!finer) return query;
  return { ...query, by: query.by.map((d) => (d === dimension ? finer : d)) };
}

export function rollUp(query: OlapQuery, dimension: string): OlapQuery {
  const coarser = ROLL[dimension];
  if (!coarser) return query;
  return { ...query, by: query.by.map((d) => (d === dimension ? coarser : d)) };
}

export function addSlice(query: OlapQuery, dimension: string, value: string): OlapQuery {
  const name = dimension.split(":")[0];
  const slices = query.slices.filter((s) => !s.startsWith(`${name}:`));
  return { ...query, slices: [...slices, `${name}:${value}`] };
}

export function clearSlices(query: OlapQuery): OlapQuery {
  return { ...query, slices: [] };
}

/** Column sum over rendered rows; the table footer shows this next to the
 * server's grand total so additivity is visible on screen. */
export function sumOfCells(doc: OlapDoc, measure: string): number {
  return doc.cells.reduce((acc, cell) => acc + (cell.values[measure] ?? 0), 0);
}

export function additivityHolds(doc: OlapDoc): boolean {
  return doc.measures.every((m) => sumOfCells(doc, m) === doc.grand_total[m]);
}

/** Bar heights for the chart, scaled to maxPx; derived from the report's own
 * series so the console never re-aggregates. */
export function chartBars(
  doc: OlapDoc,
  measure: string,
  maxPx = 120,
): { label: string; value: number; px: number }[] {
  const dataset = doc.series.datasets.find((d) => d.measure === measure);
  if (!dataset) return [];
  const peak = Math.max(...dataset.values, 0);
  return doc.series.labels.map((label, i) => ({
    label,
    value: dataset.values[i],
    px: peak > 0 ? Math.round((dataset.values[i] / peak) * maxPx) : 0,
  }));
}
