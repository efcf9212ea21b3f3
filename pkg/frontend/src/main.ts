// Browser entry point: hash routing, the store picker, and event wiring.
// Every number on screen comes from an API response; this file only
// orchestrates queries and swaps rendered markup in and out.

import { ApiClient, ApiError } from "./api.js";
import { buildEulerModel, renderEuler } from "./euler.js";
import { buildFrequencyModel, drillDown, FrequencyModel, renderFrequency } from "./frequency.js";
import { buildListingModel, exportCsv, ListingModel, renderListing } from "./listing.js";
import { MAX_STORES, MIN_STORES } from "./regions.js";
import { decodeHash, emptySelection, encodeView, Selection, ViewName } from "./selection.js";
import { buildTimelineModel, renderTimeline } from "./timeline.js";

const api = new ApiClient("");

const viewEl = document.getElementById("view") as HTMLElement;
const controlsEl = document.getElementById("controls") as HTMLElement;
const errorEl = document.getElementById("error") as HTMLElement;

let current: { view: ViewName; selection: Selection } = { view: "euler", selection: emptySelection() };
let storeNames: string[] = [];
let logNames: string[] = [];
let listingModel: ListingModel | null = null;
let frequencyModel: FrequencyModel | null = null;

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function showError(err: unknown): void {
  const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  errorEl.textContent = msg;
  errorEl.hidden = false;
}

async function loadNames(): Promise<void> {
  if (storeNames.length) return;
  const [logs, coverage] = await Promise.all([api.logs(), api.coverage()]);
  logNames = logs.logs.map((l) => l.name);
  storeNames = [...new Set([...logNames, ...coverage.vendors])].sort();
}

function checkboxList(sel: Selection): string {
  return storeNames
    .map((name) => {
      const checked = sel.stores.includes(name) ? " checked" : "";
      return (
        `<label class="store"><input type="checkbox" name="store" value="${esc(name)}"${checked}>` +
        `${esc(name)}</label>`
      );
    })
    .join("");
}

function renderControls(view: ViewName, sel: Selection): void {
  if (view === "euler") {
    controlsEl.innerHTML =
      `<form id="euler-form">${checkboxList(sel)}` +
      `<button type="submit">Draw (${MIN_STORES}-${MAX_STORES} stores)</button></form>`;
  } else if (view === "listing") {
    controlsEl.innerHTML =
      `<form id="listing-form">` +
      `<input name="expr" placeholder="set expression (optional)" value="${esc(sel.expr)}" size="40">` +
      `<input name="subject" placeholder="subject contains" value="${esc(sel.subject)}">` +
      `<label><input type="checkbox" name="expired"${sel.expiredOnly ? " checked" : ""}> expired only</label>` +
      `<input name="included_in" type="number" min="0" placeholder="in # stores"` +
      ` value="${sel.includedIn === null ? "" : sel.includedIn}" style="width:7em">` +
      `<button type="submit">Filter</button></form>`;
  } else if (view === "frequency") {
    controlsEl.innerHTML =
      `<form id="frequency-form">` +
      `<select name="program"><option value=""${sel.program ? "" : " selected"}>all stores</option>` +
      `<option value="google"${sel.program === "google" ? " selected" : ""}>google-trusted</option>` +
      `<option value="apple"${sel.program === "apple" ? " selected" : ""}>apple-trusted</option></select>` +
      `<input name="states" placeholder="states (usable,qualified)" value="${esc(sel.states)}">` +
      `<button type="submit">Apply</button></form>`;
  } else {
    const options = logNames
      .map((n) => `<option value="${esc(n)}"${n === sel.log ? " selected" : ""}>${esc(n)}</option>`)
      .join("");
    controlsEl.innerHTML =
      `<form id="timeline-form"><select name="log">${options}</select>` +
      `<button type="submit">Show</button></form>`;
  }
}

async function renderView(view: ViewName, sel: Selection): Promise<void> {
  if (view === "euler") {
    if (sel.stores.length < MIN_STORES) {
      viewEl.innerHTML = `<p class="note">Pick ${MIN_STORES}-${MAX_STORES} stores above and draw.</p>`;
      return;
    }
    const model = await buildEulerModel(api, sel.stores);
    viewEl.innerHTML = renderEuler(model);
  } else if (view === "listing") {
    listingModel = await buildListingModel(api, {
      expr: sel.expr,
      subject: sel.subject,
      expiredOnly: sel.expiredOnly,
      includedIn: sel.includedIn,
    });
    viewEl.innerHTML = renderListing(listingModel);
  } else if (view === "frequency") {
    frequencyModel = await buildFrequencyModel(api, sel.program || undefined, sel.states || undefined);
    viewEl.innerHTML = renderFrequency(frequencyModel);
  } else {
    const log = sel.log || logNames[0];
    if (!log) {
      viewEl.innerHTML = `<p class="note">No logs with snapshots yet.</p>`;
      return;
    }
    const model = await buildTimelineModel(api, log);
    viewEl.innerHTML = renderTimeline(model);
  }
}

async function route(): Promise<void> {
  errorEl.hidden = true;
  current = decodeHash(location.hash);
  document.querySelectorAll("nav a").forEach((a) => {
    a.classList.toggle("active", a.getAttribute("data-view") === current.view);
  });
  try {
    await loadNames();
    renderControls(current.view, current.selection);
    viewEl.innerHTML = `<p class="note">loading…</p>`;
    await renderView(current.view, current.selection);
  } catch (err) {
    viewEl.innerHTML = "";
    showError(err);
  }
}

function navigate(view: ViewName, sel: Selection): void {
  const target = encodeView(view, sel);
  if (target === location.hash) void route();
  else location.hash = target;
}

function onSubmit(form: HTMLFormElement): void {
  const data = new FormData(form);
  const sel = { ...current.selection };
  if (form.id === "euler-form") {
    sel.stores = data.getAll("store").map(String);
    sel.region = null;
    sel.expr = "";
    navigate("euler", sel);
  } else if (form.id === "listing-form") {
    sel.expr = String(data.get("expr") ?? "").trim();
    sel.region = null;
    sel.stores = [];
    sel.subject = String(data.get("subject") ?? "").trim();
    sel.expiredOnly = data.get("expired") !== null;
    const inc = String(data.get("included_in") ?? "").trim();
    sel.includedIn = /^\d+$/.test(inc) ? parseInt(inc, 10) : null;
    navigate("listing", sel);
  } else if (form.id === "frequency-form") {
    sel.program = String(data.get("program") ?? "");
    sel.states = sel.program ? String(data.get("states") ?? "").trim() : "";
    navigate("frequency", sel);
  } else if (form.id === "timeline-form") {
    sel.log = String(data.get("log") ?? "");
    navigate("timeline", sel);
  }
}

async function onDrillDown(bucketAttr: string): Promise<void> {
  if (!frequencyModel) return;
  const bucket = frequencyModel.buckets.find((b) => String(b.n) === bucketAttr);
  const box = document.getElementById("drilldown");
  if (!bucket || !box) return;
  if (bucket.count === 0) {
    box.innerHTML = `<p class="note">bucket ${bucketAttr} is empty</p>`;
    return;
  }
  box.innerHTML = `<p class="note">loading…</p>`;
  try {
    const doc = await drillDown(api, bucket);
    const items = doc.certs
      .map((c) => {
        const label = c.subject === null ? "metadata unavailable" : c.subject || "(unparseable certificate)";
        return `<li><code>${c.fingerprint.slice(0, 16)}…</code> ${esc(label)}</li>`;
      })
      .join("");
    box.innerHTML = `<p class="caption">in exactly ${bucket.n} stores:</p><ul>${items}</ul>`;
  } catch (err) {
    showError(err);
  }
}

async function onExport(): Promise<void> {
  if (!listingModel) return;
  try {
    const csv = await exportCsv(api, listingModel);
    const blob = new Blob([csv], { type: "text/csv" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "certificates.csv";
    a.click();
    URL.revokeObjectURL(a.href);
  } catch (err) {
    showError(err);
  }
}

document.addEventListener("submit", (ev) => {
  const form = ev.target as HTMLFormElement;
  if (["euler-form", "listing-form", "frequency-form", "timeline-form"].includes(form.id)) {
    ev.preventDefault();
    onSubmit(form);
  }
});

document.addEventListener("click", (ev) => {
  const el = ev.target as Element;
  const region = el.closest("[data-mask]");
  if (region && current.view === "euler") {
    const sel = { ...current.selection };
    sel.region = parseInt(region.getAttribute("data-mask") ?? "0", 10) || null;
    sel.expr = region.getAttribute("data-expr") ?? "";
    navigate("listing", sel);
    return;
  }
  const bar = el.closest("[data-bucket]");
  if (bar) {
    void onDrillDown(bar.getAttribute("data-bucket") ?? "");
    return;
  }
  if (el.closest("[data-export]")) void onExport();
});

window.addEventListener("hashchange", () => void route());
void route();
