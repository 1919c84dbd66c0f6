// Planar geometry for selection and drag interpretation. Kept pure so the
// interaction contracts are testable without a DOM.

import type { Point2 } from "./types";

/** Even-odd rule; points exactly on an edge count as inside enough for UI. */
export function pointInPolygon(pt: Point2, polygon: Point2[]): boolean {
  const [x, y] = pt;
  let inside = false;
  const n = polygon.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const [xi, yi] = polygon[i]!;
    const [xj, yj] = polygon[j]!;
    if (yi > y !== yj > y) {
      const xCross = xi + ((y - yi) / (yj - yi)) * (xj - xi);
      if (x < xCross) inside = !inside;
    }
  }
  return inside;
}

/** Ids of the points captured by a lasso polygon. */
export function lassoSelect(
  positions: Record<string, Point2>,
  polygon: Point2[],
): string[] {
  if (polygon.length < 3) return [];
  return Object.keys(positions)
    .filter((id) => pointInPolygon(positions[id]!, polygon))
    .sort();
}

export function centroid(points: Point2[]): Point2 {
  let sx = 0;
  let sy = 0;
  for (const [x, y] of points) {
    sx += x;
    sy += y;
  }
  return [sx / points.length, sy / points.length];
}

export function distance(a: Point2, b: Point2): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}

export function setCentroid(
  positions: Record<string, Point2>,
  memberIds: string[],
): Point2 | null {
  const pts = memberIds
    .map((id) => positions[id])
    .filter((p): p is Point2 => p !== undefined);
  return pts.length ? centroid(pts) : null;
}
