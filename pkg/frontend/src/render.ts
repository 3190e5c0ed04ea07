// Canvas renderers: draw whatever scene.ts computed. Pure presentation;
// nothing here feeds back into game state.

import { FlappyPipe, PlaneRing, RhythmNote, SkiGate } from "./protocol.js";
import { Scene } from "./scene.js";

const COLORS = {
  background: "#10141c",
  track: "#1d2433",
  accent: "#3fa7d6",
  good: "#2e9b4f",
  bad: "#d2722a",
  stop: "#d22a2a",
  text: "#e8ecf4",
  element: "#8892aa",
};

export function renderScene(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);

  switch (scene.kind) {
    case "Rhythm":
      drawRhythm(ctx, scene);
      break;
    case "Flappy":
      drawFlappy(ctx, scene);
      break;
    case "Skiing":
      drawSkiing(ctx, scene);
      break;
    case "Plane":
      drawPlane(ctx, scene);
      break;
  }

  drawHud(ctx, scene);
}

function drawRhythm(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  const laneX: Record<string, number> = { left: w * 0.35, right: w * 0.65 };
  const hitY = h * 0.8;
  for (const x of Object.values(laneX)) {
    ctx.strokeStyle = COLORS.track;
    ctx.lineWidth = 40;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, h);
    ctx.stroke();
    ctx.strokeStyle = COLORS.accent;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(x, hitY, 26, 0, Math.PI * 2);
    ctx.stroke();
  }
  for (const up of scene.upcoming) {
    const note = up.element as RhythmNote;
    const y = hitY - up.approach * (h * 0.75);
    ctx.fillStyle = COLORS.element;
    ctx.beginPath();
    ctx.arc(laneX[note.lane], y, 20, 0, Math.PI * 2);
    ctx.fill();
  }
}

function drawFlappy(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  const birdX = w * 0.25;
  for (const up of scene.upcoming) {
    const pipe = up.element as FlappyPipe;
    const x = birdX + up.approach * (w * 0.8);
    const gapTop = (1 - (pipe.gap_center + pipe.gap_height / 2)) * h;
    const gapBottom = (1 - (pipe.gap_center - pipe.gap_height / 2)) * h;
    ctx.fillStyle = COLORS.track;
    ctx.fillRect(x - 18, 0, 36, gapTop);
    ctx.fillRect(x - 18, gapBottom, 36, h - gapBottom);
  }
  ctx.fillStyle = COLORS.accent;
  ctx.beginPath();
  ctx.arc(birdX, (1 - scene.avatar.y) * h, 14, 0, Math.PI * 2);
  ctx.fill();
}

function drawSkiing(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  const skierY = h * 0.82;
  const toX = (center: number) => (center + 1) / 2 * (w * 0.8) + w * 0.1;
  for (const up of scene.upcoming) {
    const gate = up.element as SkiGate;
    const y = skierY - up.approach * (h * 0.75);
    const half = (gate.width / 2) * (w * 0.4);
    ctx.fillStyle = COLORS.stop;
    ctx.fillRect(toX(gate.center) - half - 5, y - 12, 10, 24);
    ctx.fillStyle = COLORS.accent;
    ctx.fillRect(toX(gate.center) + half - 5, y - 12, 10, 24);
  }
  ctx.fillStyle = COLORS.text;
  ctx.beginPath();
  ctx.arc(toX(scene.avatar.x), skierY, 12, 0, Math.PI * 2);
  ctx.fill();
}

function drawPlane(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  const cx = w / 2;
  const cy = h / 2;
  // simple perspective: rings shrink toward a vanishing point as they recede
  const sorted = [...scene.upcoming].sort((a, b) => b.approach - a.approach);
  for (const up of sorted) {
    const ring = up.element as PlaneRing;
    const depth = 0.25 + 0.75 * (1 - up.approach); // 0.25 far .. 1 near
    const rx = cx + (ring.center_yaw - scene.avatar.yaw) * (w * 0.4) * depth;
    const ry = cy - (ring.center_pitch - scene.avatar.pitch) * (h * 0.4) * depth;
    ctx.strokeStyle = COLORS.element;
    ctx.lineWidth = 3 + 3 * depth;
    ctx.beginPath();
    ctx.arc(rx, ry, ring.radius * (w * 0.4) * depth, 0, Math.PI * 2);
    ctx.stroke();
  }
  // the plane is a fixed crosshair; the world moves around it
  ctx.strokeStyle = COLORS.accent;
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(cx - 30, cy);
  ctx.lineTo(cx + 30, cy);
  ctx.moveTo(cx, cy - 12);
  ctx.lineTo(cx, cy + 12);
  ctx.stroke();

  if (scene.overlay) {
    const color = scene.overlay.color === "green" ? COLORS.good : COLORS.stop;
    ctx.fillStyle = color;
    for (const side of [-1, 1]) {
      ctx.beginPath();
      ctx.arc(cx + side * w * 0.35, h * 0.85, 24, 0, Math.PI * 2);
      ctx.fill();
    }
    if (scene.overlay.warning) {
      ctx.fillStyle = COLORS.stop;
      ctx.font = "bold 22px system-ui";
      ctx.textAlign = "center";
      ctx.fillText(scene.overlay.warning, cx, h * 0.12);
    }
  }
}

function drawHud(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.fillStyle = COLORS.text;
  ctx.font = "bold 26px system-ui";
  ctx.textAlign = "left";
  ctx.fillText(`score ${scene.score}`, 16, 34);

  for (const flash of scene.flashes) {
    const fade = 1 - flash.ageMs / 600;
    ctx.globalAlpha = Math.max(0, fade);
    const good = flash.kind === "Hit" || flash.kind === "GatePassed" || flash.kind === "RingPassed";
    ctx.fillStyle = good ? COLORS.good : COLORS.bad;
    ctx.font = "bold 34px system-ui";
    ctx.textAlign = "center";
    ctx.fillText(good ? `+${flash.points ?? ""}` : flash.kind, w / 2, h * 0.3);
    ctx.globalAlpha = 1;
  }

  if (scene.status !== "Running") {
    ctx.fillStyle = "rgba(16, 20, 28, 0.82)";
    ctx.fillRect(0, 0, w, h);
    ctx.fillStyle = scene.status === "Finished" ? COLORS.good : COLORS.stop;
    ctx.font = "bold 40px system-ui";
    ctx.textAlign = "center";
    ctx.fillText(scene.status === "Finished" ? `Finished! Score ${scene.score}` : `${scene.status}`, w / 2, h / 2 - 10);
    if (scene.statusReason) {
      ctx.fillStyle = COLORS.text;
      ctx.font = "20px system-ui";
      ctx.fillText(scene.statusReason, w / 2, h / 2 + 28);
    }
  }
}
