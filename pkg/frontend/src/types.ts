/** Payload shapes of the monitor service API. */

/** One NDJSON line from WS /live (one per processed frame). */
export interface LiveEvent {
  t: number;
  posture: string;
  conf: number;
  bpm: number | null;
  counts: number[];
  event: boolean;
  session: string;
}

/** GET /sessions/{id}/stats response. */
export interface StatsPayload {
  session_id: string;
  window_from_ms: number;
  window_to_ms: number;
  n_frames: number;
  durations_s: Record<string, number>;
  repetitions: Record<string, number>;
}

export interface SessionSummary {
  session_id: string;
  started_ms: number;
  ended_ms: number | null;
  n_frames: number;
}

export const POSTURES = [
  "Empty",
  "Upright",
  "Slouching",
  "LeanLeft",
  "LeanRight",
  "LeftLegCrossed",
  "RightLegCrossed",
  "LeanBack",
] as const;

export type Posture = (typeof POSTURES)[number];
