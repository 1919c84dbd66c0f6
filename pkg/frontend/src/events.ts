// WebSocket job-event stream. Handlers fire in arrival order, which the
// service guarantees matches each job's lifecycle order.

import type { JobEvent } from "./types";

export interface WebSocketLike {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
  close(): void;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

export class EventStream {
  private socket: WebSocketLike | null = null;
  private handlers = new Set<(event: JobEvent) => void>();
  readonly log: JobEvent[] = [];

  constructor(private ctor: WebSocketCtor) {}

  connect(url: string): void {
    this.close();
    const socket = new this.ctor(url);
    socket.onmessage = (ev) => {
      const event = JSON.parse(String(ev.data)) as JobEvent;
      this.log.push(event);
      for (const handler of this.handlers) handler(event);
    };
    socket.onerror = () => undefined;
    this.socket = socket;
  }

  subscribe(handler: (event: JobEvent) => void): () => void {
    this.handlers.add(handler);
    return () => this.handlers.delete(handler);
  }

  /** Resolve when the given job reaches a terminal phase. */
  waitForJob(jobId: string, timeoutMs = 120_000): Promise<JobEvent> {
    const existing = this.log.find(
      (e) => e.jobId === jobId && (e.phase === "completed" || e.phase === "failed"),
    );
    if (existing) return Promise.resolve(existing);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        unsubscribe();
        reject(new Error(`job ${jobId} timed out after ${timeoutMs}ms`));
      }, timeoutMs);
      const unsubscribe = this.subscribe((event) => {
        if (event.jobId !== jobId) return;
        if (event.phase === "completed" || event.phase === "failed") {
          clearTimeout(timer);
          unsubscribe();
          resolve(event);
        }
      });
    });
  }

  close(): void {
    if (this.socket) {
      this.socket.onmessage = null;
      this.socket.close();
      this.socket = null;
    }
  }
}
