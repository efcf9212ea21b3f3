// Frequency view: how many roots are included in exactly k of the
// stores in scope. The buckets and their member fingerprints come from
// /api/frequency; clicking a bar drills down by fetching those members
// from /api/certs.

import { ApiClient, CertsDoc } from "./api.js";

export interface FrequencyBucket {
  n: number;
  count: number;
  members: string[];
}

export interface FrequencyModel {
  universe: string;
  storeCount: number;
  buckets: FrequencyBucket[]; // dense 1..storeCount, zero-count gaps included
  asOf: string | null;
}

export async function buildFrequencyModel(
  api: ApiClient,
  program?: string,
  states?: string,
): Promise<FrequencyModel> {
  const doc = await api.frequency(program, states);
  const buckets: FrequencyBucket[] = [];
  for (let n = 1; n <= doc.store_count; n++) {
    const key = String(n);
    buckets.push({
      n,
      count: doc.buckets[key] ?? 0,
      members: doc.members[key] ?? [],
    });
  }
  return {
    universe: doc.universe,
    storeCount: doc.store_count,
    buckets,
    asOf: doc.as_of,
  };
}

export function drillDown(api: ApiClient, bucket: FrequencyBucket): Promise<CertsDoc> {
  return api.certs({ include: bucket.members });
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderFrequency(model: FrequencyModel): string {
  if (model.storeCount === 0) {
    return `<div class="frequency-view"><p class="note">No stores in scope for universe "${esc(model.universe)}".</p></div>`;
  }
  const w = 46;
  const gap = 12;
  const chartH = 220;
  const axisY = chartH + 18;
  const max = Math.max(1, ...model.buckets.map((b) => b.count));
  const parts: string[] = [];
  model.buckets.forEach((b, i) => {
    const h = Math.round((b.count / max) * (chartH - 30));
    const x = i * (w + gap) + 10;
    const y = chartH - h;
    parts.push(
      `<g class="bar" data-bucket="${b.n}" data-count="${b.count}">` +
        `<title>in exactly ${b.n} stores: ${b.count} roots</title>` +
        `<rect x="${x}" y="${y}" width="${w}" height="${h}"/>` +
        `<text x="${x + w / 2}" y="${y - 6}" text-anchor="middle" class="count">${b.count}</text>` +
        `<text x="${x + w / 2}" y="${axisY}" text-anchor="middle" class="tick">${b.n}</text></g>`,
    );
  });
  const width = model.buckets.length * (w + gap) + 20;
  return (
    `<div class="frequency-view">` +
    `<p class="caption">Roots by number of including stores — universe ` +
    `<code>${esc(model.universe)}</code> (${model.storeCount} stores). Click a bar to list its roots.</p>` +
    `<svg viewBox="0 0 ${width} ${axisY + 10}" class="freq" style="max-width:${width}px">${parts.join("")}</svg>` +
    `<div id="drilldown"></div></div>`
  );
}
