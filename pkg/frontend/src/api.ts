// Thin typed client over the session HTTP API. The engine is only ever
// touched through these endpoints.

import type {
  AxisPayload, ContourPayload, Directive, NeighborPayload,
  ProjectionPayload, SessionInfo, TrainConfig,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      const text = await res.text();
      throw new ApiError(res.status, text || res.statusText);
    }
    return (await res.json()) as T;
  }

  createSession(manifest: object): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { manifest });
  }

  createSessionFromPath(manifestPath: string): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { manifestPath });
  }

  getSession(sid: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${sid}`);
  }

  requestProjection(
    sid: string,
    projectorId: string,
    opts: { seed?: number; epochs?: number; version?: number } = {},
  ): Promise<{ jobId: string }> {
    return this.request("POST", `/sessions/${sid}/projections`, {
      projectorId,
      ...opts,
    });
  }

  getProjection(sid: string, version: number): Promise<ProjectionPayload> {
    return this.request("GET", `/sessions/${sid}/projections/${version}`);
  }

  getContours(sid: string, version: number): Promise<{ contours: ContourPayload[] }> {
    return this.request("GET", `/sessions/${sid}/contours/${version}`);
  }

  requestAxes(
    sid: string,
    specs: { concepts: string[]; length?: number }[],
    bins = 20,
  ): Promise<{ axes: AxisPayload[] }> {
    return this.request("POST", `/sessions/${sid}/axes`, { specs, bins });
  }

  submitDirective(
    sid: string,
    directive: Directive,
    trainConfig: TrainConfig = {},
  ): Promise<{ jobId: string }> {
    return this.request("POST", `/sessions/${sid}/directives`, {
      directive,
      trainConfig,
    });
  }

  uploadAugmentation(
    sid: string,
    points: object[],
    setId: string,
  ): Promise<{ added: number; version: number }> {
    return this.request("POST", `/sessions/${sid}/augment`, { points, setId });
  }

  getNeighbors(
    sid: string,
    pointId: string,
    k = 8,
    modality?: string,
  ): Promise<{ query: string; neighbors: NeighborPayload[] }> {
    const q = new URLSearchParams({ k: String(k) });
    if (modality) q.set("modality", modality);
    return this.request("GET", `/sessions/${sid}/neighbors/${pointId}?${q}`);
  }

  eventsUrl(sid: string): string {
    const base = this.baseUrl || (typeof location !== "undefined" ? location.origin : "");
    return `${base.replace(/^http/, "ws")}/sessions/${sid}/events`;
  }
}
