// Client view state. The server owns layouts and versions; this store
// owns selection, view toggles, and the single pending directive draft.

import type { AxisPayload, ContourPayload, Directive, JobEvent, LayoutPayload, ProjectionPayload } from "./types";

export interface Subset {
  name: string;
  color: string;
  ids: string[];
}

export interface ViewState {
  sessionId: string | null;
  version: number;
  layout: LayoutPayload | null;
  contours: ContourPayload[];
  contourVisible: boolean;
  axes: AxisPayload[];
  selection: string[];
  subsets: Subset[];
  pendingDirective: Directive | null;
  alignMode: boolean;
  jobLog: JobEvent[];
  status: string;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    version: 0,
    layout: null,
    contours: [],
    contourVisible: true,
    axes: [],
    selection: [],
    subsets: [],
    pendingDirective: null,
    alignMode: false,
    jobLog: [],
    status: "no session",
  };
}

function knownIds(state: ViewState): Set<string> {
  return new Set(state.layout ? Object.keys(state.layout.positions) : []);
}

export type Action =
  | { kind: "session"; sessionId: string }
  | { kind: "projection"; payload: ProjectionPayload }
  | { kind: "contours"; contours: ContourPayload[] }
  | { kind: "axes"; axes: AxisPayload[] }
  | { kind: "select"; ids: string[]; additive?: boolean }
  | { kind: "name-subset"; name: string; color: string }
  | { kind: "clear-selection" }
  | { kind: "toggle-contours" }
  | { kind: "toggle-align-mode" }
  | { kind: "draft-directive"; directive: Directive }
  | { kind: "drop-directive" }
  | { kind: "job-event"; event: JobEvent }
  | { kind: "status"; message: string };

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.kind) {
    case "session":
      return { ...initialState(), sessionId: action.sessionId, status: "session ready" };
    case "projection":
      return {
        ...state,
        version: action.payload.version,
        layout: action.payload.layout,
        // stale selections must not survive a new layout
        selection: state.selection.filter((id) => id in action.payload.layout.positions),
        status: `projection v${action.payload.version} (${action.payload.projector})`,
      };
    case "contours":
      return { ...state, contours: action.contours };
    case "axes":
      return { ...state, axes: action.axes };
    case "select": {
      const known = knownIds(state);
      const picked = action.ids.filter((id) => known.has(id));
      const merged = action.additive
        ? [...new Set([...state.selection, ...picked])]
        : picked;
      return { ...state, selection: merged.sort() };
    }
    case "name-subset": {
      if (state.selection.length === 0) return state;
      const subset: Subset = {
        name: action.name,
        color: action.color,
        ids: [...state.selection],
      };
      return {
        ...state,
        subsets: [...state.subsets.filter((s) => s.name !== action.name), subset],
      };
    }
    case "clear-selection":
      return { ...state, selection: [] };
    case "toggle-contours":
      return { ...state, contourVisible: !state.contourVisible };
    case "toggle-align-mode":
      return { ...state, alignMode: !state.alignMode, pendingDirective: null };
    case "draft-directive":
      // at most one pending directive; a new draft replaces the old one
      return { ...state, pendingDirective: action.directive };
    case "drop-directive":
      return { ...state, pendingDirective: null };
    case "job-event":
      return { ...state, jobLog: [...state.jobLog, action.event] };
    case "status":
      return { ...state, status: action.message };
  }
}

export class Store {
  private state: ViewState = initialState();
  private listeners = new Set<(state: ViewState) => void>();

  get(): ViewState {
    return this.state;
  }

  dispatch(action: Action): ViewState {
    this.state = reduce(this.state, action);
    for (const listener of this.listeners) listener(this.state);
    return this.state;
  }

  subscribe(listener: (state: ViewState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }
}
