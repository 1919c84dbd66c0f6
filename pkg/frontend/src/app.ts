// Browser orchestration: wires the store, API client, and event stream to
// the DOM. All engine state changes go through documented endpoints; the
// client renders whatever the server last said.

import { ApiClient } from "./api";
import { dragPointToSet, dragSetToSet, type SetTargets } from "./directives";
import { EventStream, type WebSocketCtor } from "./events";
import { renderGallery } from "./gallery";
import { lassoSelect } from "./geometry";
import { renderAxes } from "./axisview";
import { fitViewport, renderScatterplot, type PointMeta, type Viewport } from "./scatterplot";
import { Store } from "./state";
import type { Directive, Point2, SessionInfo } from "./types";

const VIEW: Viewport = { width: 760, height: 520, pad: 24 };
const AXIS_VIEW = { width: 760, rowHeight: 110, pad: 24 };

interface Elements {
  scatter: HTMLElement;
  axes: HTMLElement;
  gallery: HTMLElement;
  status: HTMLElement;
  jobLog: HTMLElement;
  confirm: HTMLElement;
}

export class App {
  readonly store = new Store();
  readonly events: EventStream;
  private meta: Record<string, PointMeta> = {};
  private setIds: string[] = [];
  private session: SessionInfo | null = null;
  private lassoPath: Point2[] = [];
  private dragging: { pointId: string; start: Point2 } | null = null;
  private setDragging: { setId: string; start: Point2 } | null = null;
  private pendingProposal: { directive: Directive; inequality: string } | null = null;

  constructor(
    private api: ApiClient,
    private el: Elements,
    wsCtor: WebSocketCtor = WebSocket as unknown as WebSocketCtor,
  ) {
    this.events = new EventStream(wsCtor);
    this.store.subscribe(() => this.render());
  }

  // -- session lifecycle -----------------------------------------------

  async openSession(manifestPath: string): Promise<void> {
    const info = await this.api.createSessionFromPath(manifestPath);
    this.session = info;
    this.store.dispatch({ kind: "session", sessionId: info.sessionId });
    this.events.connect(this.api.eventsUrl(info.sessionId));
    this.events.subscribe((event) => {
      this.store.dispatch({ kind: "job-event", event });
      if (event.phase === "completed" && event.layout && event.version !== undefined) {
        void this.loadVersion(event.version);
      }
    });
    await this.project("MFM");
  }

  async project(projectorId: string, epochs?: number): Promise<void> {
    if (!this.session) return;
    const sid = this.session.sessionId;
    this.store.dispatch({ kind: "status", message: `projecting (${projectorId})…` });
    const { jobId } = await this.api.requestProjection(sid, projectorId, { epochs });
    const outcome = await this.events.waitForJob(jobId);
    if (outcome.phase === "failed") {
      this.store.dispatch({ kind: "status", message: `projection failed: ${outcome.message}` });
      return;
    }
    await this.loadVersion(outcome.version ?? this.session.latestVersion);
  }

  async loadVersion(version: number): Promise<void> {
    if (!this.session) return;
    const sid = this.session.sessionId;
    const projection = await this.api.getProjection(sid, version);
    this.store.dispatch({ kind: "projection", payload: projection });
    await this.refreshMeta();
    const contours = await this.api.getContours(sid, version);
    this.store.dispatch({ kind: "contours", contours: contours.contours });
  }

  private async refreshMeta(): Promise<void> {
    if (!this.session) return;
    this.session = await this.api.getSession(this.session.sessionId);
    this.setIds = this.session.sets;
  }

  /** Point metadata rides in via the neighbors payload of each hover, so
   * the projection view only needs modality/set tags we already track. */
  setPointMeta(meta: Record<string, PointMeta>): void {
    this.meta = meta;
  }

  async defineAxis(concepts: string[], length = 100): Promise<void> {
    if (!this.session) return;
    const { axes } = await this.api.requestAxes(
      this.session.sessionId,
      [{ concepts, length }],
    );
    this.store.dispatch({ kind: "axes", axes: [...this.store.get().axes, ...axes] });
  }

  toggleContours(): void {
    this.store.dispatch({ kind: "toggle-contours" });
  }

  toggleAlignMode(): void {
    this.store.dispatch({ kind: "toggle-align-mode" });
  }

  async hoverGallery(pointId: string): Promise<void> {
    if (!this.session) return;
    const payload = await this.api.getNeighbors(this.session.sessionId, pointId, 8, "Image");
    this.el.gallery.innerHTML = renderGallery(payload.query, payload.neighbors);
  }

  async uploadAugmentation(points: object[], setId: string): Promise<void> {
    if (!this.session) return;
    await this.api.uploadAugmentation(this.session.sessionId, points, setId);
    await this.refreshMeta();
    this.store.dispatch({ kind: "status", message: `added ${points.length} points to ${setId}` });
  }

  // -- drag-to-align ------------------------------------------------------

  private targets(): SetTargets {
    const state = this.store.get();
    const members: Record<string, string[]> = {};
    for (const [id, info] of Object.entries(this.meta)) {
      if (info.setId) (members[info.setId] ??= []).push(id);
    }
    const screenPositions: Record<string, Point2> = {};
    if (state.layout) {
      const projector = fitViewport(state.layout.positions, VIEW);
      for (const [id, pos] of Object.entries(state.layout.positions)) {
        screenPositions[id] = projector.toScreen(pos);
      }
    }
    const projector = state.layout ? fitViewport(state.layout.positions, VIEW) : null;
    const contours = state.contours.map((c) => ({
      ...c,
      polylines: Object.fromEntries(
        Object.entries(c.polylines).map(([level, rings]) => [
          level,
          rings.map((ring) => ring.map((p) => (projector ? projector.toScreen(p) : p))),
        ]),
      ),
    }));
    return { contours, positions: screenPositions, members };
  }

  beginPointDrag(pointId: string, at: Point2): void {
    if (!this.store.get().alignMode) return;
    this.dragging = { pointId, start: at };
  }

  beginSetDrag(setId: string, at: Point2): void {
    if (!this.store.get().alignMode) return;
    this.setDragging = { setId, start: at };
  }

  endDrag(at: Point2): void {
    if (this.dragging) {
      const directive = dragPointToSet(
        this.dragging.pointId,
        { start: this.dragging.start, end: at },
        this.targets(),
      );
      this.dragging = null;
      if (directive === null) {
        this.store.dispatch({ kind: "status", message: "drag cancelled (no target set)" });
        return;
      }
      this.proposeDirective(directive, `move ${directive.type === "point-set" ? directive.pointId : ""} toward ${directive.type === "point-set" ? directive.targetSetId : ""}`);
      return;
    }
    if (this.setDragging) {
      const state = this.store.get();
      const reference = this.hitReferenceSet(at, this.setDragging.setId);
      const source = this.setDragging.setId;
      this.setDragging = null;
      if (reference === null) {
        this.store.dispatch({ kind: "status", message: "drag cancelled (no reference set)" });
        return;
      }
      const proposal = dragSetToSet(
        source,
        reference,
        { start: state.layout ? this.setDragStartFor(source) : [0, 0], end: at },
        this.targets(),
      );
      if (proposal) this.proposeDirective(proposal.directive, proposal.inequality);
    }
  }

  private setDragStartFor(setId: string): Point2 {
    const targets = this.targets();
    const members = targets.members[setId] ?? [];
    let sx = 0, sy = 0, n = 0;
    for (const id of members) {
      const p = targets.positions[id];
      if (p) { sx += p[0]; sy += p[1]; n += 1; }
    }
    return n ? [sx / n, sy / n] : [0, 0];
  }

  private hitReferenceSet(at: Point2, exclude: string): string | null {
    const targets = this.targets();
    const hit = targets.contours
      .filter((c) => c.setId !== exclude)
      .map((c) => c.setId)
      .find((sid) => {
        if (sid === null) return false;
        const contour = targets.contours.find((c) => c.setId === sid)!;
        return Object.values(contour.polylines).some((rings) =>
          rings.some((ring) => ring.length >= 4 && pointInRing(at, ring)));
      });
    return hit ?? null;
  }

  private proposeDirective(directive: Directive, description: string): void {
    this.pendingProposal = { directive, inequality: description };
    this.store.dispatch({ kind: "draft-directive", directive });
    this.el.confirm.innerHTML =
      `<div class="confirm-box">` +
      `<p>align: ${description}</p>` +
      `<button id="confirm-align">fine-tune</button>` +
      `<button id="cancel-align">cancel</button></div>`;
  }

  async confirmDirective(trainConfig: Record<string, number> = {}): Promise<string | null> {
    if (!this.session || !this.pendingProposal) return null;
    const { directive } = this.pendingProposal;
    this.pendingProposal = null;
    this.el.confirm.innerHTML = "";
    this.store.dispatch({ kind: "drop-directive" });
    const { jobId } = await this.api.submitDirective(
      this.session.sessionId, directive, trainConfig);
    this.store.dispatch({ kind: "status", message: `alignment ${jobId} running…` });
    return jobId;
  }

  cancelDirective(): void {
    this.pendingProposal = null;
    this.el.confirm.innerHTML = "";
    this.store.dispatch({ kind: "drop-directive" });
  }

  lasso(polygon: Point2[]): void {
    const state = this.store.get();
    if (!state.layout) return;
    const projector = fitViewport(state.layout.positions, VIEW);
    const screen: Record<string, Point2> = {};
    for (const [id, pos] of Object.entries(state.layout.positions)) {
      screen[id] = projector.toScreen(pos);
    }
    this.store.dispatch({ kind: "select", ids: lassoSelect(screen, polygon) });
  }

  // -- rendering -----------------------------------------------------------

  private render(): void {
    const state = this.store.get();
    this.el.scatter.innerHTML = renderScatterplot(
      state, this.meta, VIEW, this.setIds, this.lassoPath);
    this.el.axes.innerHTML = renderAxes(state.axes, this.setIds, AXIS_VIEW);
    this.el.status.textContent = state.status;
    this.el.jobLog.innerHTML = state.jobLog
      .slice(-12)
      .map((e) => {
        const extra = e.phase === "progress"
          ? ` epoch=${e.epoch} loss=${e.loss?.toFixed(4)}`
          : e.phase === "failed" ? ` ${e.error}: ${e.message}` : "";
        return `<div class="job-line">${e.jobId} ${e.phase}${extra}</div>`;
      })
      .join("");
  }

  setLassoPath(path: Point2[]): void {
    this.lassoPath = path;
    this.render();
  }
}

function pointInRing(pt: Point2, ring: Point2[]): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [xi, yi] = ring[i]!;
    const [xj, yj] = ring[j]!;
    if (yi > pt[1] !== yj > pt[1]) {
      const xCross = xi + ((pt[1] - yi) / (yj - yi)) * (xj - xi);
      if (pt[0] < xCross) inside = !inside;
    }
  }
  return inside;
}
