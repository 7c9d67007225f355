/** Dashboard wiring: live readouts, cushion heat map, guided labeling,
 * and the statistics view. All numbers shown come straight from service
 * payload fields. */

import { ApiClient } from "./api.js";
import { cellIntensities, parseLayoutCsv, type SensorCell } from "./heatmap.js";
import { SessionControl } from "./labeling.js";
import { LiveFeed } from "./live.js";
import { durationsConserve, isEmptyWindow, statsToBars, windowDescription } from "./stats.js";
import { POSTURES } from "./types.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function fmtConf(conf: number): string {
  return (conf * 100).toFixed(0) + "%";
}

async function start(): Promise<void> {
  const banner = el<HTMLDivElement>("banner");
  const postureOut = el<HTMLDivElement>("posture");
  const confOut = el<HTMLDivElement>("confidence");
  const bpmOut = el<HTMLDivElement>("bpm");
  const heatmap = el<HTMLDivElement>("heatmap");
  const eventsOut = el<HTMLUListElement>("events");
  const labelButtons = el<HTMLDivElement>("label-buttons");
  const statsOut = el<HTMLDivElement>("stats");
  const statsNote = el<HTMLDivElement>("stats-note");

  let cells: SensorCell[] = [];
  try {
    cells = parseLayoutCsv(await api.layoutCsv());
  } catch {
    heatmap.textContent = "layout unavailable";
  }
  const cellNodes: HTMLDivElement[] = [];
  if (cells.length === 10) {
    for (const cell of cells) {
      const node = document.createElement("div");
      node.className = "sensor";
      node.style.left = `${(cell.x / 35) * 100}%`;
      node.style.top = `${(cell.y / 45) * 100}%`;
      node.textContent = cell.id;
      heatmap.appendChild(node);
      cellNodes.push(node);
    }
  }

  const feed = new LiveFeed(api.wsUrl());
  const control = new SessionControl((sid, body) => api.postLabel(sid, body));

  feed.onChange = () => {
    banner.hidden = feed.state === "open";
    banner.textContent =
      feed.state === "connecting"
        ? "connecting..."
        : `disconnected from service (gap #${feed.gaps}) - retrying`;
    const latest = feed.latest;
    if (!latest) {
      return;
    }
    control.attach(latest.session);
    postureOut.textContent = latest.posture ?? "-";
    confOut.textContent = fmtConf(latest.conf);
    bpmOut.textContent = latest.bpm === null ? "-" : `${latest.bpm.toFixed(0)} bpm`;
    if (cellNodes.length === 10 && latest.counts?.length === 10) {
      const levels = cellIntensities(latest.counts);
      levels.forEach((v, i) => {
        cellNodes[i].style.background = `rgba(200, 60, 40, ${0.12 + 0.88 * v})`;
      });
    }
    eventsOut.replaceChildren(
      ...feed
        .recentEvents()
        .slice(-8)
        .reverse()
        .map((e) => {
          const li = document.createElement("li");
          li.textContent = `${new Date(e.t).toISOString().slice(11, 19)}  ${e.posture} (${fmtConf(e.conf)})`;
          return li;
        }),
    );
  };
  feed.connect();

  for (const posture of POSTURES) {
    const btn = document.createElement("button");
    btn.textContent = posture;
    btn.addEventListener("click", () => void control.start(posture));
    labelButtons.appendChild(btn);
  }
  const stopBtn = document.createElement("button");
  stopBtn.textContent = "stop";
  stopBtn.className = "stop";
  stopBtn.addEventListener("click", () => void control.stop());
  labelButtons.appendChild(stopBtn);

  control.onChange = () => {
    for (const btn of Array.from(labelButtons.querySelectorAll("button"))) {
      const posture = btn.textContent ?? "";
      btn.classList.toggle("active", posture === control.activeLabel);
      if (posture !== "stop") {
        const pct = Math.round(control.progressFraction(posture) * 100);
        btn.title = `${pct}% of the 60 s target collected`;
      }
    }
  };

  el<HTMLButtonElement>("refresh-stats").addEventListener("click", async () => {
    const latest = feed.latest;
    const listing = await api.sessions();
    const sid =
      latest?.session ??
      listing.live[0]?.session_id ??
      listing.stored[listing.stored.length - 1]?.session_id;
    if (!sid) {
      statsNote.textContent = "no sessions yet";
      return;
    }
    const minutes = Number(el<HTMLInputElement>("window-min").value) || 7;
    const payload = latest
      ? await api.stats(sid, latest.t - minutes * 60_000, latest.t)
      : await api.stats(sid);
    statsNote.textContent = windowDescription(payload);
    statsOut.replaceChildren();
    if (isEmptyWindow(payload)) {
      return;
    }
    const bars = statsToBars(payload);
    const maxS = Math.max(...bars.map((b) => b.durationS), 1);
    for (const bar of bars) {
      const row = document.createElement("div");
      row.className = "bar-row";
      const name = document.createElement("span");
      name.textContent = `${bar.label} (x${bar.repetitions})`;
      const track = document.createElement("div");
      track.className = "bar";
      track.style.width = `${(bar.durationS / maxS) * 100}%`;
      track.textContent = `${bar.durationS.toFixed(1)} s`;
      row.append(name, track);
      statsOut.appendChild(row);
    }
    if (!durationsConserve(payload, 333)) {
      statsNote.textContent += " (warning: bars do not cover the window)";
    }
  });
}

void start();
