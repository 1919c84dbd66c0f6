// Entry point: mounts the app and binds DOM interactions to it.

import { ApiClient } from "./api";
import { App } from "./app";
import type { Point2 } from "./types";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const api = new ApiClient("");
const app = new App(api, {
  scatter: el("scatter"),
  axes: el("axes"),
  gallery: el("gallery"),
  status: el("status"),
  jobLog: el("job-log"),
  confirm: el("confirm"),
});

// expose for the browser console and manual driving
(window as unknown as { mfwb: App }).mfwb = app;

function svgPoint(event: MouseEvent): Point2 {
  const svg = el("scatter").querySelector("svg");
  if (!svg) return [event.offsetX, event.offsetY];
  const rect = svg.getBoundingClientRect();
  return [event.clientX - rect.left, event.clientY - rect.top];
}

let lassoActive = false;
let lassoPath: Point2[] = [];

const scatter = el("scatter");
scatter.addEventListener("pointerdown", (event) => {
  const target = event.target as HTMLElement;
  const pointId = target.getAttribute?.("data-id");
  const setId = target.getAttribute?.("data-set");
  const at = svgPoint(event as MouseEvent);
  const alignMode = (el("align-mode") as HTMLInputElement).checked;
  if (pointId && (event as MouseEvent).ctrlKey) {
    app.store.dispatch({ kind: "select", ids: [pointId], additive: true });
  } else if (alignMode && pointId) {
    app.beginPointDrag(pointId, at);
  } else if (alignMode && setId) {
    app.beginSetDrag(setId, at);
  } else {
    lassoActive = true;
    lassoPath = [at];
  }
});
scatter.addEventListener("pointermove", (event) => {
  if (!lassoActive) return;
  lassoPath.push(svgPoint(event as MouseEvent));
  app.setLassoPath(lassoPath);
});
scatter.addEventListener("pointerup", (event) => {
  const at = svgPoint(event as MouseEvent);
  if (lassoActive) {
    lassoActive = false;
    if (lassoPath.length > 2) app.lasso(lassoPath);
    lassoPath = [];
    app.setLassoPath([]);
  } else {
    app.endDrag(at);
  }
});
scatter.addEventListener("pointerover", (event) => {
  const pointId = (event.target as HTMLElement).getAttribute?.("data-id");
  if (pointId) void app.hoverGallery(pointId);
});

el("align-mode").addEventListener("change", () => app.toggleAlignMode());
el("toggle-contours").addEventListener("click", () => app.toggleContours());
el("open-session").addEventListener("click", () => {
  const path = (el("manifest-path") as HTMLInputElement).value;
  void app.openSession(path);
});
el("run-projection").addEventListener("click", () => {
  const method = (el("method") as HTMLSelectElement).value;
  void app.project(method);
});
el("define-axis").addEventListener("click", () => {
  const concepts = (el("axis-concepts") as HTMLInputElement).value
    .split(",").map((s) => s.trim()).filter(Boolean);
  if (concepts.length) void app.defineAxis(concepts);
});
el("confirm").addEventListener("click", (event) => {
  const id = (event.target as HTMLElement).id;
  if (id === "confirm-align") void app.confirmDirective();
  if (id === "cancel-align") app.cancelDirective();
});
el("augment").addEventListener("click", () => {
  const raw = (el("augment-json") as HTMLTextAreaElement).value;
  const setId = (el("augment-set") as HTMLInputElement).value || "uploads";
  try {
    const points = JSON.parse(raw);
    void app.uploadAugmentation(points, setId);
  } catch {
    el("status").textContent = "augment payload is not valid JSON";
  }
});
