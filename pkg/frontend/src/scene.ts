// Render model: turns authoritative server snapshots into a drawable scene.
// Everything here is pure data-in data-out so it can be unit tested; the
// canvas layer (render.ts) just draws whatever scene it is given. No game
// rules live client-side: between snapshots we only interpolate visually.

import {
  FlappyPipe,
  GameEvent,
  GameKind,
  Level,
  PlaneRing,
  RhythmNote,
  SkiGate,
  StateSnapshot,
} from "./protocol.js";

export interface UpcomingElement {
  index: number;
  kind: GameKind;
  // normalized track position: 0 = at the avatar, 1 = horizon
  approach: number;
  element: RhythmNote | FlappyPipe | SkiGate | PlaneRing;
}

export interface FeedbackFlash {
  kind: string;     // Hit | Miss | Collision | GatePassed | RingPassed
  ageMs: number;    // since the event arrived
  points?: number;
}

export interface HandOverlay {
  color: "green" | "red";
  warning: string | null;
}

export interface Scene {
  kind: GameKind;
  avatar: { y: number; x: number; yaw: number; pitch: number };
  score: number;
  status: string;
  statusReason: string | null;
  playMs: number;
  upcoming: UpcomingElement[];
  flashes: FeedbackFlash[];
  overlay: HandOverlay | null;  // plane TwoHands hand-distance indicator
}

export const LOOKAHEAD_S = 4.0;   // how far ahead elements are visible
export const FLASH_MS = 600;      // hit/miss feedback duration

// Visual-only interpolation between two authoritative snapshots.
export function interpolateAvatar(
  prev: StateSnapshot | null,
  next: StateSnapshot,
  alpha: number,
): { y: number; x: number; yaw: number; pitch: number } {
  if (prev === null || alpha >= 1) {
    const a = next.avatar;
    return { y: a.y, x: a.x, yaw: a.yaw, pitch: a.pitch };
  }
  const lerp = (a: number, b: number) => a + (b - a) * alpha;
  return {
    y: lerp(prev.avatar.y, next.avatar.y),
    x: lerp(prev.avatar.x, next.avatar.x),
    yaw: lerp(prev.avatar.yaw, next.avatar.yaw),
    pitch: lerp(prev.avatar.pitch, next.avatar.pitch),
  };
}

export function upcomingElements(level: Level, playMs: number): UpcomingElement[] {
  const out: UpcomingElement[] = [];
  for (let i = 0; i < level.elements.length; i++) {
    const element = level.elements[i];
    const dt = element.time - playMs / 1000;
    if (dt < -0.5 || dt > LOOKAHEAD_S) continue;
    out.push({
      index: i,
      kind: level.game_kind,
      approach: Math.max(0, dt / LOOKAHEAD_S),
      element,
    });
  }
  return out;
}

const OUTCOME_KINDS = new Set(["Hit", "Miss", "Collision", "GatePassed", "RingPassed"]);

export function activeFlashes(events: { event: GameEvent; receivedMs: number }[], nowMs: number): FeedbackFlash[] {
  const out: FeedbackFlash[] = [];
  for (const { event, receivedMs } of events) {
    const age = nowMs - receivedMs;
    if (age >= 0 && age < FLASH_MS && OUTCOME_KINDS.has(event.kind)) {
      out.push({ kind: event.kind, ageMs: age, points: event.points });
    }
  }
  return out;
}

// The paper's plane-simulator helper: hands at a good distance show green
// overlays; too close or too far turns them red with a warning message.
export function handOverlay(kind: GameKind, mode: string, snapshot: StateSnapshot): HandOverlay | null {
  if (kind !== "Plane" || mode !== "TwoHands") return null;
  if (snapshot.distance_status === "Ok") {
    return { color: "green", warning: null };
  }
  return {
    color: "red",
    warning: snapshot.distance_status === "TooClose" ? "Move your hands apart" : "Bring your hands closer",
  };
}

export function buildScene(
  kind: GameKind,
  mode: string,
  level: Level,
  prev: StateSnapshot | null,
  next: StateSnapshot,
  alpha: number,
  recentEvents: { event: GameEvent; receivedMs: number }[],
  nowMs: number,
): Scene {
  return {
    kind,
    avatar: interpolateAvatar(prev, next, alpha),
    score: next.score,
    status: next.status,
    statusReason: next.status_reason,
    playMs: next.play_ms,
    upcoming: upcomingElements(level, next.play_ms),
    flashes: activeFlashes(recentEvents, nowMs),
    overlay: handOverlay(kind, mode, next),
  };
}
