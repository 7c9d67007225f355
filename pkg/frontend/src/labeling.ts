/** Guided-collection labeling: start/stop marks posted to the service.
 *
 * At most one label is active at a time (starting a new posture stops the
 * previous one first). Clicks are timestamped client-side, debounced so a
 * double-click yields a single segment, and recorded in a click log that a
 * finished run can be audited against.
 */

export interface LabelMarkBody {
  posture: string;
  action: "start" | "stop";
  t: number;
}

export interface ClickLogEntry extends LabelMarkBody {
  confirmed: boolean;
}

export type PostMark = (sessionId: string, body: LabelMarkBody) => Promise<boolean>;

export const COLLECTION_TARGET_MS = 60_000;

export class SessionControl {
  sessionId: string | null = null;
  activeLabel: string | null = null;
  activeSince: number | null = null;
  clickLog: ClickLogEntry[] = [];
  /** Accumulated collection time per posture (ms). */
  progressMs: Record<string, number> = {};
  onChange: (() => void) | null = null;

  private lastClickMs = -Infinity;

  constructor(
    private readonly post: PostMark,
    private readonly now: () => number = () => Date.now(),
    private readonly debounceMs = 300,
  ) {}

  attach(sessionId: string): void {
    this.sessionId = sessionId;
  }

  /** Fraction of the per-posture collection target already recorded. */
  progressFraction(posture: string): number {
    let ms = this.progressMs[posture] ?? 0;
    if (this.activeLabel === posture && this.activeSince !== null) {
      ms += this.now() - this.activeSince;
    }
    return Math.min(ms / COLLECTION_TARGET_MS, 1);
  }

  async start(posture: string): Promise<boolean> {
    const t = this.now();
    if (t - this.lastClickMs < this.debounceMs) {
      return false; // double-click: one segment only
    }
    this.lastClickMs = t;
    if (this.sessionId === null) {
      return false;
    }
    if (this.activeLabel === posture) {
      return false; // already collecting this posture
    }
    if (this.activeLabel !== null) {
      await this.sendStop(this.activeLabel, t);
    }
    const confirmed = await this.post(this.sessionId, {
      posture,
      action: "start",
      t,
    });
    this.clickLog.push({ posture, action: "start", t, confirmed });
    this.activeLabel = posture;
    this.activeSince = t;
    this.onChange?.();
    return confirmed;
  }

  async stop(): Promise<boolean> {
    const t = this.now();
    if (t - this.lastClickMs < this.debounceMs) {
      return false;
    }
    this.lastClickMs = t;
    if (this.sessionId === null || this.activeLabel === null) {
      return false;
    }
    const ok = await this.sendStop(this.activeLabel, t);
    this.onChange?.();
    return ok;
  }

  private async sendStop(posture: string, t: number): Promise<boolean> {
    const confirmed = await this.post(this.sessionId as string, {
      posture,
      action: "stop",
      t,
    });
    this.clickLog.push({ posture, action: "stop", t, confirmed });
    if (this.activeSince !== null) {
      this.progressMs[posture] = (this.progressMs[posture] ?? 0) + (t - this.activeSince);
    }
    this.activeLabel = null;
    this.activeSince = null;
    return confirmed;
  }

  /** The posture segments implied by the click log, in click order. */
  segments(): { posture: string; from: number; to: number }[] {
    const out: { posture: string; from: number; to: number }[] = [];
    let open: { posture: string; from: number } | null = null;
    for (const entry of this.clickLog) {
      if (entry.action === "start") {
        open = { posture: entry.posture, from: entry.t };
      } else if (open && entry.posture === open.posture) {
        out.push({ ...open, to: entry.t });
        open = null;
      }
    }
    return out;
  }
}
