import { describe, expect, it } from "vitest";

import { initialState, reduce, Store } from "../src/state";
import type { JobEvent, ProjectionPayload } from "../src/types";

const projection: ProjectionPayload = {
  version: 0,
  projector: "MFM",
  layout: { positions: { a: [0, 0], b: [1, 1], c: [2, 0] }, flags: [] },
  quality: null,
};

describe("reduce", () => {
  it("selection keeps only ids that exist in the viewed layout", () => {
    let state = reduce(initialState(), { kind: "projection", payload: projection });
    state = reduce(state, { kind: "select", ids: ["a", "ghost", "c"] });
    expect(state.selection).toEqual(["a", "c"]);
  });

  it("additive selection unions without duplicates", () => {
    let state = reduce(initialState(), { kind: "projection", payload: projection });
    state = reduce(state, { kind: "select", ids: ["a"] });
    state = reduce(state, { kind: "select", ids: ["b", "a"], additive: true });
    expect(state.selection).toEqual(["a", "b"]);
  });

  it("a new layout drops selections that no longer resolve", () => {
    let state = reduce(initialState(), { kind: "projection", payload: projection });
    state = reduce(state, { kind: "select", ids: ["a", "b"] });
    const next: ProjectionPayload = {
      ...projection,
      version: 1,
      layout: { positions: { a: [0, 0] }, flags: [] },
    };
    state = reduce(state, { kind: "projection", payload: next });
    expect(state.selection).toEqual(["a"]);
    expect(state.version).toBe(1);
  });

  it("holds at most one pending directive", () => {
    let state = reduce(initialState(), {
      kind: "draft-directive",
      directive: { type: "point-set", pointId: "a", targetSetId: "s" },
    });
    state = reduce(state, {
      kind: "draft-directive",
      directive: { type: "set-set", sourceSetId: "x", referenceSetId: "y", direction: "closer" },
    });
    expect(state.pendingDirective).toMatchObject({ type: "set-set" });
    state = reduce(state, { kind: "drop-directive" });
    expect(state.pendingDirective).toBeNull();
  });

  it("leaving align mode discards the draft", () => {
    let state = reduce(initialState(), { kind: "toggle-align-mode" });
    state = reduce(state, {
      kind: "draft-directive",
      directive: { type: "point-set", pointId: "a", targetSetId: "s" },
    });
    state = reduce(state, { kind: "toggle-align-mode" });
    expect(state.alignMode).toBe(false);
    expect(state.pendingDirective).toBeNull();
  });

  it("job events append in arrival order (render contract)", () => {
    const phases: JobEvent[] = [
      { jobId: "j", phase: "queued" },
      { jobId: "j", phase: "running" },
      { jobId: "j", phase: "progress", epoch: 0, loss: -1 },
      { jobId: "j", phase: "progress", epoch: 25, loss: -2 },
      { jobId: "j", phase: "completed" },
    ];
    let state = initialState();
    for (const event of phases) state = reduce(state, { kind: "job-event", event });
    expect(state.jobLog.map((e) => e.phase)).toEqual(
      ["queued", "running", "progress", "progress", "completed"]);
    const epochs = state.jobLog.filter((e) => e.phase === "progress").map((e) => e.epoch);
    expect(epochs).toEqual([0, 25]);
  });

  it("naming a subset snapshots the current selection", () => {
    let state = reduce(initialState(), { kind: "projection", payload: projection });
    state = reduce(state, { kind: "select", ids: ["a", "b"] });
    state = reduce(state, { kind: "name-subset", name: "picked", color: "#f00" });
    state = reduce(state, { kind: "clear-selection" });
    expect(state.subsets).toEqual([{ name: "picked", color: "#f00", ids: ["a", "b"] }]);
    expect(state.selection).toEqual([]);
  });
});

describe("Store", () => {
  it("notifies subscribers once per dispatch", () => {
    const store = new Store();
    let calls = 0;
    store.subscribe(() => { calls += 1; });
    store.dispatch({ kind: "status", message: "x" });
    store.dispatch({ kind: "toggle-contours" });
    expect(calls).toBe(2);
    expect(store.get().contourVisible).toBe(false);
  });
});
