// Euler view: one server query per region plus one per store; the
// client does no set arithmetic. Geometry is approximate (fixed circle
// layouts for 2-3 stores, a tile grid beyond that) — the counts on the
// labels are the authoritative values.

import { ApiClient } from "./api.js";
import { MAX_STORES, MIN_STORES, Region, quoteIdent, regionsOf } from "./regions.js";

export interface EulerRegion extends Region {
  count: number;
}

export interface EulerModel {
  stores: string[];
  sizes: number[]; // |store|, same order as stores
  regions: EulerRegion[]; // mask ascending: regions[k].mask === k+1
  asOf: string | null;
}

export async function buildEulerModel(api: ApiClient, stores: string[]): Promise<EulerModel> {
  if (stores.length < MIN_STORES || stores.length > MAX_STORES) {
    throw new Error(`choose ${MIN_STORES}-${MAX_STORES} stores`);
  }
  const regions = regionsOf(stores);
  const [counts, sizes] = await Promise.all([
    Promise.all(regions.map((r) => api.set(r.expr))),
    Promise.all(stores.map((s) => api.set(quoteIdent(s)))),
  ]);
  return {
    stores,
    sizes: sizes.map((r) => r.size),
    regions: regions.map((r, i) => ({ ...r, count: counts[i].size })),
    asOf: counts.length ? counts[0].as_of : null,
  };
}

const PALETTE = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2"];

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface Layout {
  circles: { cx: number; cy: number }[];
  labels: Record<number, { x: number; y: number }>; // by mask
  r: number;
  nameAt: { x: number; y: number }[];
}

const LAYOUTS: Record<number, Layout> = {
  2: {
    r: 95,
    circles: [
      { cx: 170, cy: 150 },
      { cx: 290, cy: 150 },
    ],
    labels: {
      1: { x: 118, y: 150 },
      2: { x: 342, y: 150 },
      3: { x: 230, y: 150 },
    },
    nameAt: [
      { x: 120, y: 45 },
      { x: 340, y: 45 },
    ],
  },
  3: {
    r: 95,
    circles: [
      { cx: 170, cy: 125 },
      { cx: 290, cy: 125 },
      { cx: 230, cy: 225 },
    ],
    labels: {
      1: { x: 128, y: 100 },
      2: { x: 332, y: 100 },
      3: { x: 230, y: 100 },
      4: { x: 230, y: 278 },
      5: { x: 165, y: 200 },
      6: { x: 295, y: 200 },
      7: { x: 230, y: 165 },
    },
    nameAt: [
      { x: 105, y: 28 },
      { x: 355, y: 28 },
      { x: 230, y: 338 },
    ],
  },
};

function regionLabel(region: EulerRegion, x: number, y: number): string {
  const cls = region.count === 0 ? "region-label zero" : "region-label";
  return (
    `<g class="${cls}" data-mask="${region.mask}" data-expr="${esc(region.expr)}"` +
    ` data-count="${region.count}">` +
    `<title>${esc(region.signature)}: ${region.count}</title>` +
    `<text x="${x}" y="${y}" text-anchor="middle">${region.count}</text></g>`
  );
}

function renderCircles(model: EulerModel): string {
  const layout = LAYOUTS[model.stores.length];
  const parts: string[] = [];
  model.stores.forEach((name, i) => {
    const c = layout.circles[i];
    parts.push(
      `<circle cx="${c.cx}" cy="${c.cy}" r="${layout.r}" fill="${PALETTE[i]}"` +
        ` fill-opacity="0.30" stroke="${PALETTE[i]}"/>`,
    );
    const at = layout.nameAt[i];
    parts.push(
      `<text x="${at.x}" y="${at.y}" text-anchor="middle" class="store-name"` +
        ` fill="${PALETTE[i]}">${esc(name)} (${model.sizes[i]})</text>`,
    );
  });
  for (const region of model.regions) {
    const at = layout.labels[region.mask];
    parts.push(regionLabel(region, at.x, at.y));
  }
  return `<svg viewBox="0 0 460 350" class="euler">${parts.join("")}</svg>`;
}

// 4-6 stores have up to 63 regions; circles cannot show them all, so
// fall back to one tile per region.
function renderTiles(model: EulerModel): string {
  const cols = 4;
  const w = 150;
  const h = 64;
  const parts: string[] = [];
  model.regions.forEach((region, i) => {
    const x = (i % cols) * (w + 8);
    const y = Math.floor(i / cols) * (h + 8);
    const cls = region.count === 0 ? "region-tile zero" : "region-tile";
    const sig = region.inside.join("&") + (region.outside.length ? ` − ${region.outside.join(",")}` : "");
    parts.push(
      `<g class="${cls}" data-mask="${region.mask}" data-expr="${esc(region.expr)}"` +
        ` data-count="${region.count}">` +
        `<title>${esc(region.signature)}: ${region.count}</title>` +
        `<rect x="${x}" y="${y}" width="${w}" height="${h}" rx="6"/>` +
        `<text x="${x + w / 2}" y="${y + 24}" text-anchor="middle" class="tile-sig">${esc(sig)}</text>` +
        `<text x="${x + w / 2}" y="${y + 48}" text-anchor="middle" class="tile-count">${region.count}</text></g>`,
    );
  });
  const rows = Math.ceil(model.regions.length / cols);
  const width = cols * (w + 8);
  const height = rows * (h + 8);
  const legend = model.stores
    .map((name, i) => `<span style="color:${PALETTE[i]}">${esc(name)} (${model.sizes[i]})</span>`)
    .join(" ");
  return (
    `<div class="tile-legend">${legend}</div>` +
    `<svg viewBox="0 0 ${width} ${height}" class="euler-tiles" style="max-height:${Math.min(height, 560)}px">` +
    parts.join("") +
    `</svg>`
  );
}

export function renderEuler(model: EulerModel): string {
  const body = model.stores.length <= 3 ? renderCircles(model) : renderTiles(model);
  return (
    `<div class="euler-view">${body}` +
    `<p class="note">Counts are exact (computed server-side per region); ` +
    `the geometry is approximate. Click a count to list the region.</p></div>`
  );
}
