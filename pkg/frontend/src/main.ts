/**
 * Browser bootstrap: a 2-second polling loop against the gateway plus click
 * wiring. Reloading the page reproduces the identical view from gateway data
 * alone; nothing authoritative lives here.
 */

import { GatewayClient, GatewayError, IncidentAction, OlapDoc } from "./api.js";
import {
  addSlice,
  clearSlices,
  drillDown,
  initialViewState,
  pledgeStage,
  rollUp,
} from "./state.js";
import { renderIncident, renderInbox, renderOfflineBanner, renderOlap } from "./render.js";

const POLL_MS = 2000;

function param(name: string, fallback: string): string {
  const fromUrl = new URLSearchParams(window.location.search).get(name);
  if (fromUrl) {
    window.localStorage.setItem(`qdss.${name}`, fromUrl);
    return fromUrl;
  }
  return window.localStorage.getItem(`qdss.${name}`) ?? fallback;
}

const client = new GatewayClient(
  param("gateway", "http://127.0.0.1:8642"),
  param("token", "") || null,
);

const view = initialViewState();
let activeId: string | null = null;
let olapDoc: OlapDoc | null = null;
let serverNote = "";

const el = (id: string) => document.getElementById(id)!;

async function refreshInbox(): Promise<void> {
  try {
    view.alertInbox = await client.listIncidents();
    view.offline = false;
  } catch (error) {
    if (error instanceof GatewayError) throw error;
    view.offline = true; // network failure: show the banner, keep polling
  }
  el("banner").innerHTML = renderOfflineBanner(view.offline);
  el("inbox").innerHTML = renderInbox(view.alertInbox, activeId);
}

async function refreshIncident(): Promise<void> {
  if (!activeId) return;
  view.activeIncident = await client.getIncident(activeId);
  el("incident").innerHTML = renderIncident(view.activeIncident, serverNote);
}

async function refreshOlap(): Promise<void> {
  olapDoc = await client.olapReport(view.olapQuery);
  el("olap").innerHTML = renderOlap(olapDoc, view.olapQuery);
}

async function runAction(action: IncidentAction): Promise<void> {
  if (!activeId || !view.activeIncident) return;
  const body: Record<string, unknown> = { actor: param("actor", "operator") };
  if (action === "pledge") {
    const origin = window.prompt("Pledge origin (province id, national, or organisation):");
    const medics = Number(window.prompt("Medical teams pledged:") ?? "0");
    if (!origin) return;
    body["origin"] = origin;
    body["medics"] = medics;
    body["stage"] = pledgeStage(view.activeIncident);
  }
  if (action === "declare-level") {
    body["level"] = Number(window.prompt("Disaster level 1..4:") ?? "0");
  }
  serverNote = "";
  try {
    await client.act(activeId, action, body);
  } catch (error) {
    if (error instanceof GatewayError) {
      serverNote =
        error.status === 403 ? "your token lacks operate permission" : error.message;
    } else {
      view.offline = true;
    }
  }
  await refreshIncident(); // every action immediately refetches
  await refreshInbox();
}

function wireEvents(): void {
  el("inbox").addEventListener("click", async (event) => {
    const item = (event.target as HTMLElement).closest<HTMLElement>("[data-incident]");
    if (!item) return;
    activeId = item.dataset["incident"] ?? null;
    serverNote = "";
    await refreshIncident();
    el("inbox").innerHTML = renderInbox(view.alertInbox, activeId);
  });

  el("incident").addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("[data-action]");
    if (!button || button.disabled) return;
    await runAction(button.dataset["action"] as IncidentAction);
  });

  el("olap").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    const drill = target.closest<HTMLElement>("[data-drill]");
    const roll = target.closest<HTMLElement>("[data-roll]");
    const coord = target.closest<HTMLElement>("td.coord");
    if (drill) view.olapQuery = drillDown(view.olapQuery, drill.dataset["drill"]!);
    else if (roll) view.olapQuery = rollUp(view.olapQuery, roll.dataset["roll"]!);
    else if (coord) {
      view.olapQuery = addSlice(view.olapQuery, coord.dataset["dim"]!, coord.dataset["value"]!);
    } else return;
    try {
      await refreshOlap();
    } catch (error) {
      if (error instanceof GatewayError) {
        el("olap").innerHTML =
          `<p class="server-note">${error.message}</p>` + renderOlap(olapDoc, view.olapQuery);
      }
    }
  });

  el("olap-reset").addEventListener("click", async () => {
    view.olapQuery = clearSlices({
      measures: ["deaths"],
      by: ["geography:province"],
      slices: [],
    });
    await refreshOlap();
  });
}

async function tick(): Promise<void> {
  try {
    await refreshInbox();
    if (activeId) await refreshIncident();
  } catch {
    view.offline = true;
    el("banner").innerHTML = renderOfflineBanner(true);
  }
  window.setTimeout(tick, POLL_MS);
}

wireEvents();
void tick();
void refreshOlap().catch(() => {
  el("olap").innerHTML = `<p class="empty">report endpoint unavailable</p>`;
});
