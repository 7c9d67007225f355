/** Cushion heat-map geometry and intensity mapping.
 *
 * The sensor layout is fetched from the service (GET /layout.csv) so the
 * dashboard never hardcodes geometry. Cells stay in S1..S10 order and
 * intensities are a pure rescaling of the frame's counts: the displayed
 * ranking always equals the count ranking.
 */

export interface SensorCell {
  id: string;
  x: number;
  y: number;
}

export const LAYOUT_HEADER = "sensor_id,x_cm,y_cm";
export const MAX_COUNT = 4095;

export function parseLayoutCsv(text: string): SensorCell[] {
  const lines = text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== LAYOUT_HEADER) {
    throw new Error(`bad layout header: ${lines[0] ?? "(empty file)"}`);
  }
  const byId = new Map<number, SensorCell>();
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== 3) {
      throw new Error(`bad layout row: ${line}`);
    }
    const m = /^S(\d+)$/.exec(parts[0]);
    if (!m) {
      throw new Error(`bad sensor id: ${parts[0]}`);
    }
    const x = Number(parts[1]);
    const y = Number(parts[2]);
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new Error(`bad coordinates in row: ${line}`);
    }
    byId.set(Number(m[1]), { id: parts[0], x, y });
  }
  const cells: SensorCell[] = [];
  for (let i = 1; i <= 10; i++) {
    const cell = byId.get(i);
    if (!cell) {
      throw new Error(`layout is missing S${i}`);
    }
    cells.push(cell);
  }
  if (byId.size !== 10) {
    throw new Error(`layout has ${byId.size} sensors; expected 10`);
  }
  return cells;
}

/** Per-cell intensity in [0, 1], same order as the input counts. */
export function cellIntensities(counts: number[], maxCount = MAX_COUNT): number[] {
  if (counts.length !== 10) {
    throw new Error(`expected 10 counts, got ${counts.length}`);
  }
  return counts.map((c) => Math.min(Math.max(c / maxCount, 0), 1));
}

/** Ranking of values (0 = smallest); ties share order of appearance. */
export function ranking(values: number[]): number[] {
  const order = values
    .map((v, i) => [v, i] as const)
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const ranks = new Array(values.length).fill(0);
  order.forEach(([, idx], rank) => {
    ranks[idx] = rank;
  });
  return ranks;
}
