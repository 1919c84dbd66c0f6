// Concept-axis view: horizontal axes with instance ticks, set-mean boxes,
// a histogram strip, and curves linking shared instances on adjacent axes.

import { setColor } from "./scatterplot";
import type { AxisPayload } from "./types";

export interface AxisViewport {
  width: number;
  rowHeight: number;
  pad: number;
}

function axisTitle(axis: AxisPayload): string {
  return axis.kind === "one-end"
    ? axis.concepts[0] ?? ""
    : `${axis.concepts[0]} ↔ ${axis.concepts[1]}`;
}

export function renderAxes(
  axes: AxisPayload[],
  setIds: string[],
  view: AxisViewport,
): string {
  if (!axes.length) return `<svg width="${view.width}" height="40"></svg>`;
  const height = axes.length * view.rowHeight + view.pad;
  const parts: string[] = [];
  const scale = (axis: AxisPayload, value: number) =>
    view.pad + (value / axis.length) * (view.width - 2 * view.pad);

  axes.forEach((axis, row) => {
    const y = view.pad + row * view.rowHeight + 40;
    const maxCount = Math.max(1, ...axis.histogram);
    axis.histogram.forEach((count, b) => {
      const binW = (view.width - 2 * view.pad) / axis.histogram.length;
      const h = (count / maxCount) * 24;
      parts.push(
        `<rect class="hist" x="${(view.pad + b * binW).toFixed(1)}" ` +
        `y="${(y - 6 - h).toFixed(1)}" width="${Math.max(binW - 1, 1).toFixed(1)}" ` +
        `height="${h.toFixed(1)}" fill="#d0d7de"/>`,
      );
    });
    parts.push(
      `<line class="axis-line" x1="${view.pad}" y1="${y}" ` +
      `x2="${view.width - view.pad}" y2="${y}" stroke="#333" stroke-width="1.5"/>`,
      `<text class="axis-title" x="${view.pad}" y="${y - 36}" font-size="12">` +
      `${axisTitle(axis)}</text>`,
    );
    for (const [id, value] of Object.entries(axis.positions)) {
      parts.push(
        `<line class="axis-tick" data-id="${id}" x1="${scale(axis, value).toFixed(1)}" ` +
        `y1="${y - 5}" x2="${scale(axis, value).toFixed(1)}" y2="${y + 5}" ` +
        `stroke="#4e79a7" stroke-opacity="0.45"/>`,
      );
    }
    for (const [sid, value] of Object.entries(axis.setBoxes)) {
      const x = scale(axis, value);
      parts.push(
        `<rect class="set-box" data-set="${sid}" data-axis="${row}" ` +
        `x="${(x - 6).toFixed(1)}" y="${(y - 14).toFixed(1)}" width="12" height="12" ` +
        `fill="${setColor(setIds, sid)}" stroke="#222"/>`,
      );
    }
    if (row > 0) {
      const prev = axes[row - 1]!;
      const prevY = view.pad + (row - 1) * view.rowHeight + 40;
      for (const [id, posPrev, posHere] of axis.pairLinks) {
        const x1 = scale(prev, posPrev);
        const x2 = scale(axis, posHere);
        const mid = (prevY + y) / 2;
        parts.push(
          `<path class="pair-link" data-id="${id}" d="M${x1.toFixed(1)},${prevY + 6} ` +
          `C${x1.toFixed(1)},${mid} ${x2.toFixed(1)},${mid} ${x2.toFixed(1)},${y - 6}" ` +
          `fill="none" stroke="#888" stroke-opacity="0.35"/>`,
        );
      }
    }
  });
  return `<svg width="${view.width}" height="${height}" class="axes">${parts.join("")}</svg>`;
}
