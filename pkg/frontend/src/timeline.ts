// Timeline view: distinct-root count of one log over its snapshots,
// with a marker at every change event.

import { ApiClient, ChangeEventRow, TimelinePoint } from "./api.js";

export interface TimelineModel {
  log: string;
  points: TimelinePoint[];
  events: ChangeEventRow[];
}

export async function buildTimelineModel(api: ApiClient, log: string): Promise<TimelineModel> {
  const [timeline, events] = await Promise.all([api.timeline(log), api.events(log)]);
  return { log, points: timeline.points, events: events.events };
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

const W = 640;
const H = 240;
const PAD = { left: 42, right: 16, top: 14, bottom: 26 };

export function renderTimeline(model: TimelineModel): string {
  if (model.points.length === 0) {
    return `<div class="timeline-view"><p class="note">No snapshots for ${esc(model.log)}.</p></div>`;
  }
  const times = model.points.map((p) => Date.parse(p.t));
  const t0 = Math.min(...times);
  const t1 = Math.max(...times);
  const span = Math.max(1, t1 - t0);
  const maxY = Math.max(1, ...model.points.map((p) => p.distinct));
  const sx = (t: number) => PAD.left + ((t - t0) / span) * (W - PAD.left - PAD.right);
  const sy = (v: number) => H - PAD.bottom - (v / maxY) * (H - PAD.top - PAD.bottom);

  const line = model.points
    .map((p, i) => `${i ? "L" : "M"}${sx(times[i]).toFixed(1)},${sy(p.distinct).toFixed(1)}`)
    .join(" ");
  const dots = model.points
    .map(
      (p, i) =>
        `<circle class="pt" cx="${sx(times[i]).toFixed(1)}" cy="${sy(p.distinct).toFixed(1)}" r="3">` +
        `<title>${esc(p.t)}: ${p.distinct} distinct</title></circle>`,
    )
    .join("");
  const markers = model.events
    .map((e, i) => {
      const x = sx(Date.parse(e.to)).toFixed(1);
      const summary = `+${e.added.length} / -${e.removed.length} at ${e.to}`;
      return (
        `<g class="event" data-event="${i}"><title>${esc(summary)}</title>` +
        `<line x1="${x}" y1="${PAD.top}" x2="${x}" y2="${H - PAD.bottom}"/>` +
        `<circle cx="${x}" cy="${PAD.top}" r="5"/></g>`
      );
    })
    .join("");
  const yTicks = [0, Math.round(maxY / 2), maxY]
    .map((v) => {
      const y = sy(v).toFixed(1);
      return (
        `<text x="${PAD.left - 6}" y="${y}" text-anchor="end" class="tick">${v}</text>` +
        `<line class="grid" x1="${PAD.left}" y1="${y}" x2="${W - PAD.right}" y2="${y}"/>`
      );
    })
    .join("");
  const xLabels =
    `<text x="${PAD.left}" y="${H - 6}" class="tick">${esc(model.points[0].t)}</text>` +
    `<text x="${W - PAD.right}" y="${H - 6}" text-anchor="end" class="tick">` +
    `${esc(model.points[model.points.length - 1].t)}</text>`;

  return (
    `<div class="timeline-view">` +
    `<p class="caption">Distinct roots of <code>${esc(model.log)}</code> over time — ` +
    `${model.points.length} snapshots, ${model.events.length} change events.</p>` +
    `<svg viewBox="0 0 ${W} ${H}" class="timeline">${yTicks}` +
    `<path class="series" d="${line}"/>${dots}${markers}${xLabels}</svg></div>`
  );
}
