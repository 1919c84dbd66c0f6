// Mapping from drag gestures to alignment directives.
//
// A drag that ends outside every target produces null (the caller shows a
// cancel affordance instead of firing a fine-tune). Set drags infer the
// direction from whether the gesture reduced the centroid distance, and
// the caller must confirm the rendered inequality before submission.

import { distance, pointInPolygon, setCentroid } from "./geometry";
import type { ContourPayload, Directive, Point2 } from "./types";

export interface DragGesture {
  start: Point2;
  end: Point2;
}

export interface SetTargets {
  contours: ContourPayload[];
  positions: Record<string, Point2>;
  members: Record<string, string[]>;
}

/** The set whose outermost contour contains the point, if any. */
export function hitTestSet(pt: Point2, contours: ContourPayload[]): string | null {
  for (const contour of contours) {
    if (contour.setId === null) continue;
    for (const rings of Object.values(contour.polylines)) {
      for (const ring of rings) {
        if (ring.length >= 4 && pointInPolygon(pt, ring)) return contour.setId;
      }
    }
  }
  return null;
}

/** Dragging a point onto a set's contour: point-set directive. */
export function dragPointToSet(
  pointId: string,
  gesture: DragGesture,
  targets: SetTargets,
  originView: "projection" | "axis" = "projection",
): Directive | null {
  const target = hitTestSet(gesture.end, targets.contours);
  if (target === null) return null;
  return {
    type: "point-set",
    pointId,
    targetSetId: target,
    originView,
  };
}

export interface SetDragProposal {
  directive: Directive;
  /** Human-readable inequality shown in the confirmation dialog. */
  inequality: string;
}

/**
 * Dragging a set's contour (or axis box) relative to another set. The
 * inferred direction is "closer" when the gesture moved the dragged
 * centroid toward the reference centroid, "farther" otherwise.
 */
export function dragSetToSet(
  sourceSetId: string,
  referenceSetId: string,
  gesture: DragGesture,
  targets: SetTargets,
  originView: "projection" | "axis" = "projection",
): SetDragProposal | null {
  if (sourceSetId === referenceSetId) return null;
  const reference = setCentroid(targets.positions, targets.members[referenceSetId] ?? []);
  if (reference === null) return null;
  const before = distance(gesture.start, reference);
  const after = distance(gesture.end, reference);
  if (before === after) return null;
  const direction = after < before ? "closer" : "farther";
  const cmp = direction === "closer" ? "<" : ">";
  return {
    directive: {
      type: "set-set",
      sourceSetId,
      referenceSetId,
      direction,
      originView,
    },
    inequality:
      `mean distance(${sourceSetId}, ${referenceSetId}) ${cmp} ` +
      `mean distance(${sourceSetId}, everything else)`,
  };
}
