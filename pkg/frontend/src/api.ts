/** Thin typed wrappers over the monitor's HTTP API. */

import type { SessionSummary, StatsPayload } from "./types.js";
import type { LabelMarkBody } from "./labeling.js";

export class ApiClient {
  constructor(private readonly base: string = "") {}

  async health(): Promise<{ status: string; model_checksum: string }> {
    return this.get("/health");
  }

  async sessions(): Promise<{ stored: SessionSummary[]; live: SessionSummary[] }> {
    return this.get("/sessions");
  }

  async stats(sessionId: string, frm?: number, to?: number): Promise<StatsPayload> {
    const params = new URLSearchParams();
    if (frm !== undefined) params.set("from", String(frm));
    if (to !== undefined) params.set("to", String(to));
    const qs = params.toString();
    return this.get(`/sessions/${sessionId}/stats${qs ? "?" + qs : ""}`);
  }

  async layoutCsv(): Promise<string> {
    const res = await fetch(this.base + "/layout.csv");
    if (!res.ok) {
      throw new Error(`GET /layout.csv -> ${res.status}`);
    }
    return res.text();
  }

  async postLabel(sessionId: string, body: LabelMarkBody): Promise<boolean> {
    const res = await fetch(`${this.base}/sessions/${sessionId}/label`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      return false;
    }
    const payload = (await res.json()) as { confirmed?: boolean };
    return payload.confirmed === true;
  }

  wsUrl(): string {
    const root = this.base || window.location.origin;
    return root.replace(/^http/, "ws") + "/live";
  }

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) {
      throw new Error(`GET ${path} -> ${res.status}`);
    }
    return (await res.json()) as T;
  }
}
