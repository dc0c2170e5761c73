/** Shared types for the annotator UI. */

export interface ItemView {
  itemId: string;
  trialId: number;
  topicId: number;
  candidateLabel: string;
  topWords: string[];
  titles: string[];
  groundTruth: string | null;
  scale: number;
}

export interface Progress {
  rated: number;
  remaining: number;
}

export type SessionPhase =
  | "idle"
  | "loading"
  | "ready"
  | "submitting"
  | "done"
  | "error";

export interface SessionState {
  phase: SessionPhase;
  item: ItemView | null;
  selectedScore: number | null;
  progress: Progress;
  /** Retry/error banner text; null when everything is fine. */
  message: string | null;
}
