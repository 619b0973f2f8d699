/**
 * HTML renderers. Pure string builders so the same code is testable under
 * node and drives the browser via innerHTML.
 */

import type { IncidentDetail, IncidentSummary, NeedsTable, OlapDoc } from "./api.js";
import {
  ACTIONS,
  ActionName,
  additivityHolds,
  canDrillDown,
  canRollUp,
  chartBars,
  disabledReason,
  enabledActions,
  levelBadge,
  sortInbox,
  sumOfCells,
} from "./state.js";

function esc(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderOfflineBanner(offline: boolean): string {
  if (!offline) return "";
  return `<div class="banner offline">gateway unreachable — retrying…</div>`;
}

export function renderInbox(summaries: IncidentSummary[], activeId: string | null): string {
  const rows = sortInbox(summaries);
  if (rows.length === 0) {
    return `<p class="empty">No alerts yet.</p>`;
  }
  const items = rows
    .map((s) => {
      const marker = s.high_risk ? `<span class="risk">HIGH RISK</span>` : "";
      const active = s.incident_id === activeId ? " active" : "";
      return (
        `<li class="inbox-item${active}" data-incident="${esc(s.incident_id)}">` +
        `<span class="mag">M${esc(s.magnitude)}</span> ${marker} ` +
        `<span class="id">${esc(s.incident_id)}</span> ` +
        `<span class="state">${esc(s.state)}</span> ` +
        `<span class="badge">${esc(levelBadge(s))}</span> ` +
        `<time>${esc(s.issued_at)}</time></li>`
      );
    })
    .join("");
  return `<ul class="inbox">${items}</ul>`;
}

const NEEDS_ROWS: [string, keyof NeedsTable & string][] = [
  ["Citizens in area (A_c)", "a_c"],
  ["Medical teams needed", "medics_needed"],
  ["Medical teams in area", "medics_available"],
  ["Medical team lack", "medic_lack"],
  ["Displaced", "displaced"],
  ["Tents", "tents"],
  ["Sanitation units", "sanitation_units"],
  ["Food shelters", "food_shelters"],
  ["Blankets", "blankets"],
  ["Rice (kg)", "rice_kg"],
  ["Baby feed (kg)", "baby_feed_kg"],
  ["Volunteers", "volunteers_national"],
  ["Loss estimate", "total_loss_estimate"],
];

function renderNeeds(detail: IncidentDetail): string {
  const needs = detail.needs;
  if (!needs) return `<p class="empty">Not assessed yet.</p>`;
  const rows = NEEDS_ROWS.map(
    ([label, key]) =>
      `<tr><th>${esc(label)}</th><td>${esc((needs as never as Record<string, unknown>)[key])}</td></tr>`,
  ).join("");
  const checklist = Object.entries(needs.category_checklist)
    .map(([cat, ok]) => `<li class="${ok ? "ok" : "missing"}">${esc(cat)}</li>`)
    .join("");
  const sites = needs.refugee_sites.length
    ? needs.refugee_sites.map((r) => esc(r)).join(", ")
    : "—";
  return (
    `<table class="needs">${rows}</table>` +
    `<p><strong>Refugee sites:</strong> ${sites}</p>` +
    `<ul class="checklist">${checklist}</ul>`
  );
}

function renderPrediction(detail: IncidentDetail): string {
  const p = detail.prediction;
  if (!p) return `<p class="empty">No comparable past quakes.</p>`;
  const neighbors = p.neighbors
    .map(
      (n) =>
        `<li>${esc(n.quake_id)} <span class="dist">d=${n.distance.toFixed(3)}</span>` +
        ` <span class="weight">w=${n.weight.toFixed(3)}</span></li>`,
    )
    .join("");
  return (
    `<p>Predicted deaths <strong>${Math.round(p.predicted_deaths)}</strong>, ` +
    `injured <strong>${Math.round(p.predicted_injured)}</strong>, ` +
    `level <strong>${p.predicted_level}</strong></p>` +
    `<ol class="neighbors">${neighbors}</ol>`
  );
}

function renderPledges(detail: IncidentDetail): string {
  if (detail.pledges.length === 0) return `<p class="empty">No pledges yet.</p>`;
  const rows = detail.pledges
    .map(
      (p) =>
        `<tr><td>${esc(p.origin)}</td><td>${esc(p.medics_pledged)}</td>` +
        `<td>stage ${esc(p.stage)}</td><td>${esc(p.pledged_at)}</td></tr>`,
    )
    .join("");
  return `<table class="pledges"><tr><th>origin</th><th>teams</th><th></th><th></th></tr>${rows}</table>`;
}

export function renderActions(detail: IncidentDetail): string {
  const enabled = enabledActions(detail);
  return ACTIONS.map((action: ActionName) => {
    const attrs = enabled.has(action)
      ? ""
      : ` disabled title="${esc(disabledReason(detail, action))}"`;
    return `<button class="action" data-action="${action}"${attrs}>${action}</button>`;
  }).join(" ");
}

export function renderIncident(detail: IncidentDetail | null, errorNote = ""): string {
  if (!detail) return `<p class="empty">Select an incident.</p>`;
  const plan = detail.dispatch_plan.length
    ? `<ul class="plan">` +
      detail.dispatch_plan
        .map((d) => `<li>ask ${esc(d.origin)} for ${esc(d.medics_requested)}</li>`)
        .join("") +
      `</ul>`
    : "";
  const audit = detail.audit_log
    .map(
      (e) =>
        `<li><span class="seq">${e.seq}</span> ${esc(e.at)} ${esc(e.actor)} ` +
        `<strong>${esc(e.event)}</strong></li>`,
    )
    .join("");
  const note = errorNote ? `<p class="server-note">${esc(errorNote)}</p>` : "";
  return (
    `<h2>${esc(detail.incident_id)} <span class="state">${esc(detail.state)}</span> ` +
    `<span class="badge">${esc(levelBadge(detail))}</span></h2>` +
    `<p>Alert M${esc(detail.alert.magnitude)} at ${esc(detail.alert.issued_at)}, ` +
    `residual lack <strong id="residual">${esc(detail.residual_lack)}</strong></p>` +
    note +
    `<div class="actions">${renderActions(detail)}</div>` +
    plan +
    `<h3>Needs</h3>${renderNeeds(detail)}` +
    `<h3>Prediction</h3>${renderPrediction(detail)}` +
    `<h3>Pledges</h3>${renderPledges(detail)}` +
    `<h3>Audit</h3><ol class="audit">${audit}</ol>`
  );
}

export function renderOlap(doc: OlapDoc | null, query: { by: string[] }): string {
  if (!doc) return `<p class="empty">No report loaded.</p>`;
  const header =
    doc.dimensions.map((d) => `<th>${esc(d)}</th>`).join("") +
    doc.measures.map((m) => `<th class="num">${esc(m)}</th>`).join("");
  const body = doc.cells
    .map((cell) => {
      const coords = cell.coords
        .map((c, i) => `<td class="coord" data-dim="${esc(doc.dimensions[i])}" data-value="${esc(c)}">${esc(c)}</td>`)
        .join("");
      const values = doc.measures
        .map((m) => `<td class="num">${esc(cell.values[m])}</td>`)
        .join("");
      return `<tr>${coords}${values}</tr>`;
    })
    .join("");
  const totals =
    `<td>TOTAL</td>` +
    `<td></td>`.repeat(Math.max(0, doc.dimensions.length - 1)) +
    doc.measures
      .map((m) => `<td class="num total">${esc(doc.grand_total[m])}</td>`)
      .join("");
  const additivity = additivityHolds(doc)
    ? `<p class="additivity ok">rows sum to totals (${doc.measures
        .map((m) => `${esc(m)}=${esc(sumOfCells(doc, m))}`)
        .join(", ")})</p>`
    : `<p class="additivity broken">row sums disagree with totals</p>`;
  const controls = query.by
    .map((dim) => {
      const drill = canDrillDown(dim)
        ? `<button data-drill="${esc(dim)}">drill down ${esc(dim)}</button>`
        : "";
      const roll = canRollUp(dim)
        ? `<button data-roll="${esc(dim)}">roll up ${esc(dim)}</button>`
        : "";
      return drill + roll;
    })
    .join(" ");
  const bars = chartBars(doc, doc.measures[0])
    .map(
      (b) =>
        `<div class="bar" style="height:${b.px}px" title="${esc(b.label)}: ${esc(b.value)}"></div>`,
    )
    .join("");
  return (
    `<div class="olap-controls">${controls}</div>` +
    `<table class="olap"><tr>${header}</tr>${body}<tr class="totals">${totals}</tr></table>` +
    additivity +
    `<div class="chart">${bars}</div>`
  );
}
