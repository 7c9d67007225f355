/** Statistics view-model: a pure reshaping of the /stats payload.
 *
 * Every displayed number is a field of the API response; the dashboard
 * computes nothing of record itself.
 */

import type { StatsPayload } from "./types.js";

export interface StatsBar {
  label: string;
  durationS: number;
  repetitions: number;
}

export function statsToBars(payload: StatsPayload): StatsBar[] {
  return Object.keys(payload.durations_s)
    .sort()
    .map((label) => ({
      label,
      durationS: payload.durations_s[label],
      repetitions: payload.repetitions[label] ?? 0,
    }));
}

export function isEmptyWindow(payload: StatsPayload): boolean {
  return payload.n_frames === 0;
}

export function windowDescription(payload: StatsPayload): string {
  if (isEmptyWindow(payload)) {
    return "no frames in this window";
  }
  const spanS = (payload.window_to_ms - payload.window_from_ms) / 1000;
  return `${payload.n_frames} frames over ${spanS.toFixed(1)} s`;
}

/** Total bar length vs window span; holds within one frame period. */
export function durationsConserve(payload: StatsPayload, framePeriodMs: number): boolean {
  const total = Object.values(payload.durations_s).reduce((a, b) => a + b, 0);
  const coveredS = (payload.n_frames * framePeriodMs) / 1000;
  return Math.abs(total - coveredS) <= framePeriodMs / 1000 + 1e-9;
}
