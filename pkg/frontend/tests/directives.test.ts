import { describe, expect, it } from "vitest";

import { dragPointToSet, dragSetToSet, hitTestSet, type SetTargets } from "../src/directives";
import type { ContourPayload, Point2 } from "../src/types";

function squareContour(setId: string, cx: number, cy: number, half = 10): ContourPayload {
  const ring: Point2[] = [
    [cx - half, cy - half], [cx + half, cy - half],
    [cx + half, cy + half], [cx - half, cy + half],
    [cx - half, cy - half],
  ];
  return { setId, levels: [0.5], polylines: { "0.5": [ring] }, flags: [] };
}

function targets(): SetTargets {
  return {
    contours: [squareContour("frogs", 20, 20), squareContour("birds", 80, 20)],
    positions: {
      f1: [18, 18], f2: [22, 22], b1: [78, 18], b2: [82, 22], stray: [50, 80],
    },
    members: { frogs: ["f1", "f2"], birds: ["b1", "b2"] },
  };
}

describe("hitTestSet", () => {
  it("finds the contour containing the point", () => {
    expect(hitTestSet([20, 20], targets().contours)).toBe("frogs");
    expect(hitTestSet([80, 20], targets().contours)).toBe("birds");
    expect(hitTestSet([50, 80], targets().contours)).toBeNull();
  });
});

describe("dragPointToSet (acceptance: drag ends inside a contour)", () => {
  it("targets the set whose contour contains the drop point", () => {
    const directive = dragPointToSet("stray", { start: [50, 80], end: [21, 19] }, targets());
    expect(directive).toEqual({
      type: "point-set",
      pointId: "stray",
      targetSetId: "frogs",
      originView: "projection",
    });
  });

  it("produces no directive when the drop point misses every set", () => {
    const directive = dragPointToSet("stray", { start: [50, 80], end: [50, 60] }, targets());
    expect(directive).toBeNull();
  });
});

describe("dragSetToSet direction inference", () => {
  it("infers closer when the centroid distance shrinks", () => {
    const proposal = dragSetToSet(
      "frogs", "birds", { start: [20, 20], end: [60, 20] }, targets());
    expect(proposal?.directive).toMatchObject({
      type: "set-set",
      sourceSetId: "frogs",
      referenceSetId: "birds",
      direction: "closer",
    });
    expect(proposal?.inequality).toContain("<");
  });

  it("infers farther when the centroid distance grows", () => {
    const proposal = dragSetToSet(
      "frogs", "birds", { start: [20, 20], end: [-40, 20] }, targets());
    expect(proposal?.directive).toMatchObject({ direction: "farther" });
    expect(proposal?.inequality).toContain(">");
  });

  it("rejects identical sets and unknown references", () => {
    expect(dragSetToSet("frogs", "frogs", { start: [0, 0], end: [1, 1] }, targets()))
      .toBeNull();
    expect(dragSetToSet("frogs", "ghosts", { start: [0, 0], end: [1, 1] }, targets()))
      .toBeNull();
  });
});
