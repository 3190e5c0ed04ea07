// Angle-vs-time chart for the replay viewer. Series come straight from the
// server's CSV export so the plot shows exactly the recorded signal.

import { TimelineMarker } from "./replay.js";

export interface SeriesPoint { t: number; v: number }

export function parseTimeseriesCsv(csv: string): SeriesPoint[] {
  const lines = csv.trim().split("\n");
  if (lines[0] !== "timestamp_ms,angle_deg") {
    throw new Error(`unexpected CSV header: ${lines[0]}`);
  }
  const out: SeriesPoint[] = [];
  for (const line of lines.slice(1)) {
    if (!line) continue;
    const [t, v] = line.split(",");
    out.push({ t: Number(t), v: Number(v) });
  }
  return out;
}

export interface ChartLayout {
  width: number;
  height: number;
  tMax: number;
  vMin: number;
  vMax: number;
}

export function layoutFor(series: SeriesPoint[], width: number, height: number): ChartLayout {
  let vMin = -10;
  let vMax = 10;
  let tMax = 1;
  for (const p of series) {
    vMin = Math.min(vMin, p.v);
    vMax = Math.max(vMax, p.v);
    tMax = Math.max(tMax, p.t);
  }
  const pad = (vMax - vMin) * 0.1;
  return { width, height, tMax, vMin: vMin - pad, vMax: vMax + pad };
}

export function toPixel(layout: ChartLayout, p: SeriesPoint): [number, number] {
  const x = (p.t / layout.tMax) * layout.width;
  const y = layout.height - ((p.v - layout.vMin) / (layout.vMax - layout.vMin)) * layout.height;
  return [x, y];
}

const MARKER_COLORS: Record<string, string> = {
  good: "#2e9b4f",
  bad: "#d2722a",
  stop: "#d22a2a",
  info: "#6a7fd2",
};

export function drawChart(
  ctx: CanvasRenderingContext2D,
  series: SeriesPoint[],
  markers: TimelineMarker[],
  cursorFraction: number | null,
): void {
  const layout = layoutFor(series, ctx.canvas.width, ctx.canvas.height);
  ctx.clearRect(0, 0, layout.width, layout.height);

  // zero line
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  ctx.beginPath();
  const [, zeroY] = toPixel(layout, { t: 0, v: 0 });
  ctx.moveTo(0, zeroY);
  ctx.lineTo(layout.width, zeroY);
  ctx.stroke();

  // angle trace
  ctx.strokeStyle = "#3fa7d6";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  series.forEach((p, i) => {
    const [x, y] = toPixel(layout, p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  // event markers along the bottom edge
  for (const m of markers) {
    ctx.fillStyle = MARKER_COLORS[m.severity];
    const x = m.fraction * layout.width;
    ctx.fillRect(x - 1, m.severity === "stop" ? 0 : layout.height - 10, m.severity === "stop" ? 2 : 2, m.severity === "stop" ? layout.height : 10);
  }

  if (cursorFraction !== null) {
    ctx.strokeStyle = "#eee";
    ctx.beginPath();
    const x = cursorFraction * layout.width;
    ctx.moveTo(x, 0);
    ctx.lineTo(x, layout.height);
    ctx.stroke();
  }
}
