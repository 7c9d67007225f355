import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { BUFFER_SPAN_MS, LiveFeed, type SocketLike } from "../src/live.js";
import type { LiveEvent } from "../src/types.js";

class FakeSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  closedByClient = false;

  close(): void {
    this.closedByClient = true;
  }

  open(): void {
    this.onopen?.();
  }

  drop(): void {
    this.onclose?.();
  }

  push(event: Partial<LiveEvent>): void {
    this.onmessage?.({ data: JSON.stringify(event) });
  }
}

function makeFeed() {
  const sockets: FakeSocket[] = [];
  const feed = new LiveFeed("ws://x/live", {
    makeSocket: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    setTimer: (fn, ms) => setTimeout(fn, ms),
    reconnectBaseMs: 100,
  });
  return { feed, sockets };
}

function ev(t: number, extra: Partial<LiveEvent> = {}): Partial<LiveEvent> {
  return {
    t,
    posture: "Upright",
    conf: 0.9,
    bpm: 72,
    counts: Array(10).fill(100),
    event: false,
    session: "s1",
    ...extra,
  };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("LiveFeed", () => {
  it("updates posture and bpm per received event", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    expect(feed.state).toBe("open");
    sockets[0].push(ev(1000, { posture: "Slouching", bpm: 68 }));
    expect(feed.latest?.posture).toBe("Slouching");
    expect(feed.latest?.bpm).toBe(68);
    sockets[0].push(ev(1333, { posture: "Upright" }));
    expect(feed.latest?.posture).toBe("Upright");
  });

  it("shows the disconnected banner within 2 s of service loss", () => {
    const { feed, sockets } = makeFeed();
    const states: string[] = [];
    feed.onChange = () => states.push(feed.state);
    feed.connect();
    sockets[0].open();
    const before = Date.now();
    sockets[0].drop();
    const elapsed = Date.now() - before;
    expect(feed.state).toBe("disconnected");
    expect(feed.gaps).toBe(1);
    expect(elapsed).toBeLessThan(2000);
    expect(states).toContain("disconnected");
  });

  it("reconnects with backoff and counts gaps", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    sockets[0].drop();
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(100);
    expect(sockets.length).toBe(2);
    sockets[1].drop(); // connection refused
    vi.advanceTimersByTime(199);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(3);
    sockets[2].open();
    expect(feed.state).toBe("open");
    expect(feed.gaps).toBe(2);
  });

  it("keeps at most 60 s in the rolling buffer", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    for (let i = 0; i <= 300; i++) {
      sockets[0].push(ev(i * 333));
    }
    expect(feed.bufferSpanMs()).toBeLessThanOrEqual(BUFFER_SPAN_MS);
    expect(feed.buffer[0].t).toBeGreaterThanOrEqual(300 * 333 - BUFFER_SPAN_MS);
  });

  it("preserves server timestamp order on screen", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    for (const t of [0, 333, 666, 999]) {
      sockets[0].push(ev(t, { event: t % 666 === 0 }));
    }
    const shown = feed.buffer.map((e) => e.t);
    expect(shown).toEqual([...shown].sort((a, b) => a - b));
    expect(feed.recentEvents().map((e) => e.t)).toEqual([0, 666]);
  });

  it("ignores malformed lines without dying", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    sockets[0].onmessage?.({ data: "{not json" });
    sockets[0].push(ev(50));
    expect(feed.latest?.t).toBe(50);
  });

  it("stops reconnecting after close()", () => {
    const { feed, sockets } = makeFeed();
    feed.connect();
    sockets[0].open();
    feed.close();
    sockets[0].drop();
    vi.advanceTimersByTime(10_000);
    expect(sockets.length).toBe(1);
  });
});
