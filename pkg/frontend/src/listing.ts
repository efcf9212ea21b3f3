// Certificate listing: the rows come from /api/certs, already filtered
// server-side by membership (via a set expression resolved through
// /api/set), subject substring, and expiry. The included-in filter is
// applied to the server-computed included_in field of the fetched rows.

import { ApiClient, CertQuery, CertRow } from "./api.js";

export interface ListingQuery {
  expr: string; // "" = every certificate the observatory knows
  subject: string;
  expiredOnly: boolean;
  includedIn: number | null;
}

export interface ListingModel {
  query: ListingQuery;
  rows: CertRow[];
  fetched: number; // row count before the included-in display filter
  asOf: string | null;
}

function certQuery(q: ListingQuery, include?: string[]): CertQuery {
  const out: CertQuery = {};
  if (include !== undefined) out.include = include;
  if (q.subject) out.subject = q.subject;
  if (q.expiredOnly) out.expired = true;
  return out;
}

export async function buildListingModel(api: ApiClient, q: ListingQuery): Promise<ListingModel> {
  let include: string[] | undefined;
  if (q.expr) {
    const result = await api.set(q.expr);
    include = result.fingerprints;
    if (include.length === 0) {
      return { query: q, rows: [], fetched: 0, asOf: result.as_of };
    }
  }
  const doc = await api.certs(certQuery(q, include));
  let rows = doc.certs;
  if (q.includedIn !== null) rows = rows.filter((r) => r.included_in === q.includedIn);
  return { query: q, rows, fetched: doc.count, asOf: doc.as_of };
}

export function exportCsv(api: ApiClient, model: ListingModel): Promise<string> {
  const q = model.query;
  // The export must be exactly the displayed rows, so when any filter
  // narrowed them beyond what the server-side query expresses, pin the
  // fingerprints explicitly.
  const pin = Boolean(q.expr) || q.includedIn !== null;
  if (pin && model.rows.length === 0) {
    return Promise.reject(new Error("nothing to export"));
  }
  const include = pin ? model.rows.map((r) => r.fingerprint) : undefined;
  return api.certsCsv(certQuery(q, include));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function cell(v: string | null): string {
  return v === null ? "" : esc(v);
}

function row(r: CertRow): string {
  const fp = `<td class="fp" title="${r.fingerprint}">${r.fingerprint.slice(0, 16)}…</td>`;
  if (r.subject === null) {
    // fingerprint-only member (e.g. a vendor list distributed as hashes)
    return (
      `<tr class="unavailable">${fp}` +
      `<td colspan="4">metadata unavailable</td>` +
      `<td class="num">${r.included_in}</td></tr>`
    );
  }
  const subject = r.parse_ok ? esc(r.subject) : "(unparseable certificate)";
  return (
    `<tr>${fp}<td>${subject}</td><td>${cell(r.issuer)}</td>` +
    `<td>${cell(r.not_before)}</td><td>${cell(r.not_after)}</td>` +
    `<td class="num">${r.included_in}</td></tr>`
  );
}

export function renderListing(model: ListingModel): string {
  const caption = model.query.expr
    ? `<code>${esc(model.query.expr)}</code> — ${model.rows.length} certificates`
    : `${model.rows.length} certificates`;
  const body = model.rows.map(row).join("");
  return (
    `<div class="listing-view">` +
    `<p class="caption">${caption} <button type="button" data-export>Export CSV</button></p>` +
    `<table class="certs"><thead><tr><th>fingerprint</th><th>subject</th>` +
    `<th>issuer</th><th>not before</th><th>not after</th><th>in # stores</th></tr></thead>` +
    `<tbody>${body}</tbody></table></div>`
  );
}
