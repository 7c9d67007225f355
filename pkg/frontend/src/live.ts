/** Live event subscription over the monitor's WebSocket.
 *
 * Keeps a rolling 60 s buffer, the latest event, and an explicit connection
 * state. Service loss flips the state to "disconnected" immediately on
 * close/error (the banner the UI shows), and reconnection runs on an
 * exponential backoff with a gap counter so missed spans stay visible.
 */

import type { LiveEvent } from "./types.js";

export type ConnectionState = "connecting" | "open" | "disconnected";

export const BUFFER_SPAN_MS = 60_000;

/** The subset of the WebSocket surface the feed uses (swappable in tests). */
export interface SocketLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  close(): void;
}

export interface LiveFeedOptions {
  makeSocket?: (url: string) => SocketLike;
  setTimer?: (fn: () => void, ms: number) => unknown;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
}

export class LiveFeed {
  state: ConnectionState = "connecting";
  latest: LiveEvent | null = null;
  buffer: LiveEvent[] = [];
  /** Number of connection gaps seen so far (the gap indicator). */
  gaps = 0;
  onChange: (() => void) | null = null;

  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private readonly makeSocket: (url: string) => SocketLike;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly baseMs: number;
  private readonly maxMs: number;

  constructor(private readonly url: string, options: LiveFeedOptions = {}) {
    this.makeSocket =
      options.makeSocket ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.baseMs = options.reconnectBaseMs ?? 500;
    this.maxMs = options.reconnectMaxMs ?? 5_000;
  }

  connect(): void {
    if (this.closed) {
      return;
    }
    this.state = "connecting";
    this.emit();
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.state = "open";
      this.attempts = 0;
      this.emit();
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => this.handleLoss();
    sock.onerror = () => this.handleLoss();
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  private handleLoss(): void {
    if (this.closed || this.state === "disconnected") {
      return;
    }
    this.state = "disconnected";
    this.gaps += 1;
    this.emit();
    const delay = Math.min(this.baseMs * 2 ** this.attempts, this.maxMs);
    this.attempts += 1;
    this.setTimer(() => this.connect(), delay);
  }

  private handleMessage(raw: string): void {
    let event: LiveEvent;
    try {
      event = JSON.parse(raw) as LiveEvent;
    } catch {
      return; // a malformed line never kills the feed
    }
    if (typeof event.t !== "number" || typeof event.posture !== "string") {
      return;
    }
    this.latest = event;
    this.buffer.push(event);
    const cutoff = event.t - BUFFER_SPAN_MS;
    while (this.buffer.length > 0 && this.buffer[0].t < cutoff) {
      this.buffer.shift();
    }
    this.emit();
  }

  /** Span covered by the rolling buffer, in ms. */
  bufferSpanMs(): number {
    if (this.buffer.length < 2) {
      return 0;
    }
    return this.buffer[this.buffer.length - 1].t - this.buffer[0].t;
  }

  /** Posture-change events currently in the buffer, oldest first. */
  recentEvents(): LiveEvent[] {
    return this.buffer.filter((e) => e.event);
  }

  private emit(): void {
    this.onChange?.();
  }
}
