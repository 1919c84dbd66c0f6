// Payload shapes of the session service (see docs/api.md in the repo root).

export type Point2 = [number, number];

export interface SessionInfo {
  sessionId: string;
  versions: number;
  latestVersion: number;
  points: number;
  dimension: number;
  concepts: string[];
  sets: string[];
  projections: Record<string, string>;
  jobs: Record<string, string>;
}

export interface LayoutPayload {
  positions: Record<string, Point2>;
  flags: string[];
}

export interface QualityPayload {
  interTrust: number;
  interCont: number;
  intraTrust: number;
  intraCont: number;
  interPopulation: string;
  intraPopulation: string;
}

export interface ProjectionPayload {
  version: number;
  projector: string;
  layout: LayoutPayload;
  quality: QualityPayload | null;
  lossTrace?: { epoch: number; L: number }[] | null;
}

export interface ContourPayload {
  setId: string | null;
  levels: number[];
  polylines: Record<string, Point2[][]>;
  flags: string[];
}

export interface AxisPayload {
  kind: "one-end" | "two-end";
  concepts: string[];
  length: number;
  positions: Record<string, number>;
  setBoxes: Record<string, number>;
  histogram: number[];
  pairLinks: [string, number, number][];
  flags: string[];
}

export interface NeighborPayload {
  id: string;
  distance: number;
  assetUri: string | null;
  label: string | null;
  setId: string | null;
}

export type PointSetDirective = {
  type: "point-set";
  pointId: string;
  targetSetId: string;
  repelledSetIds?: string[];
  originView?: string;
};

export type SetSetDirective = {
  type: "set-set";
  sourceSetId: string;
  referenceSetId: string;
  direction: "closer" | "farther";
  originView?: string;
};

export type Directive = PointSetDirective | SetSetDirective;

export interface TrainConfig {
  epochs?: number;
  learningRate?: number;
  margin?: number;
  maxTriplets?: number;
  seed?: number;
}

export type JobPhase = "queued" | "running" | "progress" | "completed" | "failed";

export interface JobEvent {
  jobId: string;
  phase: JobPhase;
  kind?: string;
  epoch?: number;
  loss?: number;
  version?: number;
  layout?: LayoutPayload;
  verify?: { lhs: number; rhs: number; satisfied: boolean };
  error?: string;
  message?: string;
}
