// The view state a deep link encodes: chosen stores, the active region
// within them, listing filters, and the frequency/timeline parameters.
// encodeView/decodeHash round-trip exactly, so reloading a link
// reproduces the same view.

import { maskFromString, maskToString, regionExpr, regionsOf } from "./regions.js";

export type ViewName = "euler" | "listing" | "frequency" | "timeline";

export interface Selection {
  stores: string[];
  region: number | null; // bitmask over stores
  expr: string; // listing set expression ("" = whole universe)
  subject: string;
  expiredOnly: boolean;
  includedIn: number | null;
  program: string;
  states: string;
  log: string;
}

export function emptySelection(): Selection {
  return {
    stores: [],
    region: null,
    expr: "",
    subject: "",
    expiredOnly: false,
    includedIn: null,
    program: "",
    states: "",
    log: "",
  };
}

export function encodeView(view: ViewName, sel: Selection): string {
  const params = new URLSearchParams();
  if (sel.stores.length) params.set("stores", sel.stores.join(","));
  let expr = sel.expr;
  if (sel.region !== null && sel.stores.length) {
    params.set("region", maskToString(sel.region, sel.stores.length));
    // a region link always spells out its expression too
    const r = regionsOf(sel.stores)[sel.region - 1];
    expr = regionExpr(r.inside, r.outside);
  }
  if (expr) params.set("expr", expr);
  if (sel.subject) params.set("subject", sel.subject);
  if (sel.expiredOnly) params.set("expired", "1");
  if (sel.includedIn !== null) params.set("included_in", String(sel.includedIn));
  if (sel.program) params.set("program", sel.program);
  if (sel.states) params.set("states", sel.states);
  if (sel.log) params.set("log", sel.log);
  const s = params.toString();
  return `#/${view}${s ? `?${s}` : ""}`;
}

const VIEWS: ViewName[] = ["euler", "listing", "frequency", "timeline"];

export function decodeHash(hash: string): { view: ViewName; selection: Selection } {
  const sel = emptySelection();
  let body = hash.startsWith("#") ? hash.slice(1) : hash;
  if (body.startsWith("/")) body = body.slice(1);
  const q = body.indexOf("?");
  const name = q === -1 ? body : body.slice(0, q);
  const view = (VIEWS as string[]).includes(name) ? (name as ViewName) : "euler";
  if (q !== -1) {
    const params = new URLSearchParams(body.slice(q + 1));
    const stores = params.get("stores");
    if (stores) sel.stores = stores.split(",").filter((s) => s.length);
    const region = params.get("region");
    if (region !== null && region.length === sel.stores.length && sel.stores.length) {
      sel.region = maskFromString(region);
      if (sel.region === 0) sel.region = null;
    }
    sel.expr = params.get("expr") ?? "";
    // region + stores are authoritative: recompute the expression rather
    // than trusting a possibly edited expr parameter.
    if (sel.region !== null) {
      const r = regionsOf(sel.stores)[sel.region - 1];
      sel.expr = regionExpr(r.inside, r.outside);
    }
    sel.subject = params.get("subject") ?? "";
    sel.expiredOnly = params.get("expired") === "1";
    const inc = params.get("included_in");
    if (inc !== null && /^\d+$/.test(inc)) sel.includedIn = parseInt(inc, 10);
    sel.program = params.get("program") ?? "";
    sel.states = params.get("states") ?? "";
    sel.log = params.get("log") ?? "";
  }
  return { view, selection: sel };
}
