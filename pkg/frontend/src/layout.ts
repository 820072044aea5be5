/** Pure builders for the three panels; strings in, SVG/HTML strings out. */
import { OUTLIER_COLOR, colorFor, phaseIndex } from "./colors.js";
import type { PlotData, PlotPhase, PlotSample } from "./types.js";

export function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Phase list order: ascending peak count, then ascending id. */
export function sortedPhaseRows(phases: PlotPhase[]): PlotPhase[] {
  return [...phases].sort(
    (a, b) => a.peak_count - b.peak_count || phaseIndex(a.id) - phaseIndex(b.id),
  );
}

/** Concentric marker radii, outermost first. */
export function markerRadii(rings: number, r0: number, step = 1.4): number[] {
  return Array.from({ length: rings }, (_, k) => Math.max(1.5, r0 - step * k));
}

/** Ring order for a mixed sample: lowest phase id outermost. */
export function ringPhases(sample: PlotSample): string[] {
  return [...sample.phases].sort((a, b) => phaseIndex(a) - phaseIndex(b));
}

function sampleGroup(
  sample: PlotSample,
  px: number,
  py: number,
  r0: number,
): string {
  const rings = sample.outlier ? [OUTLIER_COLOR] : ringPhases(sample).map(colorFor);
  const radii = markerRadii(rings.length, r0);
  const circles = rings
    .map(
      (color, k) =>
        `<circle cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="${radii[k]!.toFixed(1)}" fill="${color}"/>`,
    )
    .join("");
  const phases = sample.phases.join(" ");
  return (
    `<g class="sample${sample.outlier ? " outlier" : ""}" ` +
    `data-sample-id="${esc(sample.id)}" data-phases="${esc(phases)}">` +
    `${circles}<title>${esc(sample.id)}</title></g>`
  );
}

function svgOpen(size: number): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${size} ${size}" role="img">`;
}

/** Wafer scatter: physical positions, +y up, circular outline. */
export function buildWaferSvg(plot: PlotData, size = 380, pad = 24): string {
  const samples = plot.samples;
  const rmax = Math.max(
    1e-9,
    ...samples.map((s) => Math.hypot(s.x_mm, s.y_mm)),
  );
  const scale = (size / 2 - pad) / rmax;
  const mid = size / 2;
  const parts = [svgOpen(size)];
  parts.push(
    `<circle cx="${mid}" cy="${mid}" r="${(size / 2 - pad + 8).toFixed(1)}" class="wafer-edge" fill="none" stroke="#cccccc"/>`,
  );
  for (const s of samples) {
    const px = mid + s.x_mm * scale;
    const py = mid - s.y_mm * scale;
    parts.push(sampleGroup(s, px, py, 5.5));
  }
  parts.push("</svg>");
  return parts.join("");
}

const SQRT3_2 = Math.sqrt(3) / 2;

/** Ternary scatter: unit-triangle coordinates from the server, +y up. */
export function buildTernarySvg(plot: PlotData, size = 380, pad = 24): string {
  const span = size - 2 * pad;
  const toPx = (tx: number, ty: number): [number, number] => [
    pad + tx * span,
    size - pad - ty * span,
  ];
  const corners: [number, number][] = [
    toPx(0, 0),
    toPx(1, 0),
    toPx(0.5, SQRT3_2),
  ];
  const path = corners.map(([x, y]) => `${x.toFixed(1)} ${y.toFixed(1)}`).join(" L ");
  const parts = [svgOpen(size)];
  parts.push(`<path d="M ${path} Z" fill="none" stroke="#cccccc"/>`);
  for (const s of plot.samples) {
    const [tx, ty] = [s.ternary[0] ?? 0, s.ternary[1] ?? 0];
    const [px, py] = toPx(tx, ty);
    parts.push(sampleGroup(s, px, py, 5.0));
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Inline tick track for one representative pattern. */
export function buildTickTrack(
  peaks: number[],
  width: number,
  color: string,
  trackW = 180,
  trackH = 18,
): string {
  const mid = trackH / 2;
  const ticks = peaks
    .map((peak) => {
      const x = (trackW * (peak + 0.5)) / Math.max(1, width);
      return `<line x1="${x.toFixed(1)}" y1="2" x2="${x.toFixed(1)}" y2="${trackH - 2}" stroke="${color}" stroke-width="2"/>`;
    })
    .join("");
  return (
    `<svg class="ticks" xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${trackW} ${trackH}" role="img">` +
    `<line x1="0" y1="${mid}" x2="${trackW}" y2="${mid}" stroke="#dddddd"/>` +
    ticks +
    "</svg>"
  );
}

/** The binary-peak stack: one selectable row per phase. */
export function buildPhaseList(
  plot: PlotData,
  selected: ReadonlySet<string>,
): string {
  const width = plot.width ?? 1;
  const rows = sortedPhaseRows(plot.phases).map((p) => {
    const cls = selected.has(p.id) ? "phase-row selected" : "phase-row";
    return (
      `<div class="${cls}" data-phase-id="${esc(p.id)}" role="option" ` +
      `aria-selected="${selected.has(p.id)}">` +
      `<span class="swatch" style="background:${colorFor(p.id)}"></span>` +
      `<span class="phase-name">${esc(p.id)}</span>` +
      `<span class="phase-meta">${p.peak_count} peaks · ${p.member_count} samples</span>` +
      buildTickTrack(p.peaks, width, colorFor(p.id)) +
      "</div>"
    );
  });
  if (rows.length === 0) return '<p class="empty">No phases survived.</p>';
  return rows.join("");
}
