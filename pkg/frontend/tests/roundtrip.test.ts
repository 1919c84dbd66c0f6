// Steering round trip against a live engine: drag the planted
// misassigned point onto the correct cluster's contour, submit the
// resulting directive, stream progress, and confirm the re-rendered
// layout moved the point toward the target set's centroid.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ApiClient } from "../src/api";
import { dragPointToSet, type SetTargets } from "../src/directives";
import { EventStream, type WebSocketCtor } from "../src/events";
import { distance, setCentroid } from "../src/geometry";
import type { JobEvent, Point2 } from "../src/types";

const PYTHON = process.env.MFWB_PYTHON ?? "python3";

function engineAvailable(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import mfwb"], { timeout: 20_000 });
  return probe.status === 0;
}

const available = engineAvailable();

describe.skipIf(!available)("steering round trip", () => {
  const port = 21000 + Math.floor(Math.random() * 20000);
  const base = `http://127.0.0.1:${port}`;
  let dataDir: string;
  let server: ChildProcess;
  const api = new ApiClient(base);

  beforeAll(async () => {
    dataDir = mkdtempSync(join(tmpdir(), "mfwb-ui-"));
    const gen = spawnSync(PYTHON, [
      "-m", "mfwb.cli", "synth-benchmark", "--preset", "misassign2",
      "--seed", "0", "--out", join(dataDir, "mis.json"),
    ], { timeout: 60_000 });
    expect(gen.status, String(gen.stderr)).toBe(0);

    server = spawn(PYTHON, [
      "-m", "mfwb.cli", "serve", "--port", String(port), "--data-dir", dataDir,
    ], { stdio: "ignore" });
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        const res = await fetch(`${base}/sessions/probe`);
        if (res.status === 404) break; // server answers; no such session
      } catch {
        /* not up yet */
      }
      if (Date.now() > deadline) throw new Error("service never came up");
      await new Promise((r) => setTimeout(r, 250));
    }
  }, 60_000);

  afterAll(() => {
    server?.kill();
    rmSync(dataDir, { recursive: true, force: true });
  });

  it("drag -> directive -> progress events -> moved layout", async () => {
    const started = Date.now();
    const session = await api.createSessionFromPath("mis.json");
    const events = new EventStream(WebSocket as unknown as WebSocketCtor);
    events.connect(api.eventsUrl(session.sessionId));

    // project so the UI has a layout and contours to drag on
    const projJob = await api.requestProjection(session.sessionId, "MFM", {
      seed: 0, epochs: 150,
    });
    const projDone = await events.waitForJob(projJob.jobId);
    expect(projDone.phase).toBe("completed");
    const projection = await api.getProjection(session.sessionId, 0);
    const contours = await api.getContours(session.sessionId, 0);

    // set membership from the session's sets endpoint payloads
    const info = await api.getSession(session.sessionId);
    expect(info.sets).toContain("a");
    const neighbors = await api.getNeighbors(session.sessionId, "img-planted", 5, "Image");
    expect(neighbors.neighbors.length).toBe(5);

    // members of the target set for centroid bookkeeping
    const members: Record<string, string[]> = { a: [], b: [] };
    for (const id of Object.keys(projection.layout.positions)) {
      if (id.startsWith("img-a")) members.a!.push(id);
      if (id.startsWith("img-b")) members.b!.push(id);
    }
    const targets: SetTargets = {
      contours: contours.contours,
      positions: projection.layout.positions,
      members,
    };
    const targetCentroid = setCentroid(projection.layout.positions, members.a!) as Point2;
    expect(targetCentroid).not.toBeNull();

    // the drag gesture the UI produces: grab the planted point, drop it
    // inside the correct cluster's contour (its centroid is inside)
    const start = projection.layout.positions["img-planted"] as Point2;
    const directive = dragPointToSet("img-planted", { start, end: targetCentroid }, targets);
    expect(directive).not.toBeNull();
    expect(directive).toMatchObject({ type: "point-set", targetSetId: "a" });

    const distanceBefore = distance(start, targetCentroid);
    const job = await api.submitDirective(session.sessionId, directive!, {
      epochs: 200, margin: 0.1, seed: 0,
    });
    const done = await events.waitForJob(job.jobId);
    expect(done.phase).toBe("completed");
    expect(done.verify?.satisfied).toBe(true);

    // progress events streamed in order for this job
    const phases = events.log
      .filter((e: JobEvent) => e.jobId === job.jobId)
      .map((e) => e.phase);
    expect(phases[0]).toBe("queued");
    expect(phases).toContain("progress");
    expect(phases[phases.length - 1]).toBe("completed");
    expect(phases.indexOf("running")).toBeLessThan(phases.indexOf("progress"));

    // the completion re-renders a layout in which the point moved toward
    // the target set centroid
    const next = await api.getProjection(session.sessionId, done.version!);
    const movedPoint = next.layout.positions["img-planted"] as Point2;
    const newCentroid = setCentroid(next.layout.positions, members.a!) as Point2;
    const distanceAfter = distance(movedPoint, newCentroid);
    expect(distanceAfter).toBeLessThan(distanceBefore);

    events.close();
    expect(Date.now() - started).toBeLessThan(120_000);
  }, 120_000);
});
