// Projection view rendering: pure functions from payloads + view state to
// SVG markup. Interaction handlers live in app.ts; everything here is
// deterministic and DOM-free.

import type { ViewState } from "./state";
import type { ContourPayload, Point2 } from "./types";

export interface Viewport {
  width: number;
  height: number;
  pad: number;
}

export interface Projector {
  toScreen(p: Point2): Point2;
  toData(p: Point2): Point2;
}

export function fitViewport(
  positions: Record<string, Point2>,
  view: Viewport,
): Projector {
  const pts = Object.values(positions);
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const [x, y] of pts) {
    xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
    ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
  }
  if (!pts.length || xmin === xmax) { xmin -= 1; xmax += 1; }
  if (!pts.length || ymin === ymax) { ymin -= 1; ymax += 1; }
  const sx = (view.width - 2 * view.pad) / (xmax - xmin);
  const sy = (view.height - 2 * view.pad) / (ymax - ymin);
  const s = Math.min(sx, sy);
  return {
    toScreen: ([x, y]) => [
      view.pad + (x - xmin) * s,
      view.height - view.pad - (y - ymin) * s,
    ],
    toData: ([px, py]) => [
      xmin + (px - view.pad) / s,
      ymin + (view.height - view.pad - py) / s,
    ],
  };
}

const SET_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

export function setColor(setIds: string[], setId: string | null): string {
  if (setId === null) return "#888888";
  const idx = setIds.indexOf(setId);
  return SET_COLORS[((idx % SET_COLORS.length) + SET_COLORS.length) % SET_COLORS.length]!;
}

function escapeAttr(value: string): string {
  return value.replace(/&/g, "&amp;").replace(/"/g, "&quot;").replace(/</g, "&lt;");
}

export interface PointMeta {
  modality: string;
  setId: string | null;
}

export function renderContours(
  contours: ContourPayload[],
  projector: Projector,
  setIds: string[],
): string {
  const parts: string[] = [];
  for (const contour of contours) {
    const color = setColor(setIds, contour.setId);
    for (const rings of Object.values(contour.polylines)) {
      for (const ring of rings) {
        const d = ring
          .map((p, i) => `${i === 0 ? "M" : "L"}${projector.toScreen(p).map((v) => v.toFixed(1)).join(",")}`)
          .join(" ");
        parts.push(
          `<path class="contour" data-set="${escapeAttr(contour.setId ?? "")}" ` +
          `d="${d} Z" fill="${color}" fill-opacity="0.08" stroke="${color}" ` +
          `stroke-opacity="0.6" stroke-width="1"/>`,
        );
      }
    }
  }
  return parts.join("");
}

export function renderPoints(
  state: ViewState,
  meta: Record<string, PointMeta>,
  projector: Projector,
  setIds: string[],
): string {
  if (!state.layout) return "";
  const selected = new Set(state.selection);
  const parts: string[] = [];
  for (const [id, pos] of Object.entries(state.layout.positions)) {
    const [cx, cy] = projector.toScreen(pos);
    const info = meta[id] ?? { modality: "Image", setId: null };
    const color = setColor(setIds, info.setId);
    const isText = info.modality === "Text";
    const cls = ["pt", isText ? "pt-text" : "pt-image", selected.has(id) ? "pt-selected" : ""]
      .filter(Boolean).join(" ");
    if (isText) {
      parts.push(
        `<rect class="${cls}" data-id="${escapeAttr(id)}" x="${(cx - 5).toFixed(1)}" ` +
        `y="${(cy - 5).toFixed(1)}" width="10" height="10" fill="${color}" ` +
        `stroke="#222" stroke-width="1.2"/>`,
      );
    } else {
      parts.push(
        `<circle class="${cls}" data-id="${escapeAttr(id)}" cx="${cx.toFixed(1)}" ` +
        `cy="${cy.toFixed(1)}" r="${selected.has(id) ? 5 : 3.5}" fill="${color}" ` +
        `stroke="${selected.has(id) ? "#111" : "white"}" stroke-width="1"/>`,
      );
    }
  }
  return parts.join("");
}

export function renderLasso(polygon: Point2[]): string {
  if (polygon.length < 2) return "";
  const d = polygon
    .map((p, i) => `${i === 0 ? "M" : "L"}${p[0].toFixed(1)},${p[1].toFixed(1)}`)
    .join(" ");
  return `<path class="lasso" d="${d}" fill="#4e79a7" fill-opacity="0.08" ` +
    `stroke="#4e79a7" stroke-dasharray="4 3" stroke-width="1.5"/>`;
}

/** Whole projection view; a pure function of (payloads, view state). */
export function renderScatterplot(
  state: ViewState,
  meta: Record<string, PointMeta>,
  view: Viewport,
  setIds: string[],
  lassoPath: Point2[] = [],
): string {
  if (!state.layout) {
    return `<svg width="${view.width}" height="${view.height}"></svg>`;
  }
  const projector = fitViewport(state.layout.positions, view);
  const contours = state.contourVisible
    ? renderContours(state.contours, projector, setIds)
    : "";
  return (
    `<svg width="${view.width}" height="${view.height}" class="scatter">` +
    `<rect class="backdrop" width="${view.width}" height="${view.height}" fill="white"/>` +
    contours +
    renderPoints(state, meta, projector, setIds) +
    renderLasso(lassoPath) +
    `</svg>`
  );
}
