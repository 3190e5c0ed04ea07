// Replay viewer model: timeline scrubbing over server-verified states.
// The client never re-simulates; scrubbing selects one of the states the
// server recomputed and verified, so what the therapist sees is exactly
// what the engine did.

import { GameEvent, ReplayData, ReplayState } from "./protocol.js";

export interface TimelineMarker {
  tick: number;
  fraction: number;        // 0..1 along the timeline
  kind: string;
  severity: "info" | "good" | "bad" | "stop";
  label: string;
}

const SEVERITY: Record<string, TimelineMarker["severity"]> = {
  Hit: "good",
  GatePassed: "good",
  RingPassed: "good",
  Miss: "bad",
  Collision: "bad",
  SafetyStop: "stop",
  Adapted: "info",
  Finished: "info",
  DistanceWarning: "info",
  GestureUsed: "info",
};

export class ReplayTimeline {
  readonly states: ReplayState[];
  readonly events: { tick: number; event: GameEvent }[];
  readonly lastTick: number;

  constructor(data: ReplayData) {
    if (!data.verified) {
      throw new Error("refusing to display an unverified replay");
    }
    this.states = data.states;
    this.events = data.events;
    this.lastTick = data.states.length ? data.states[data.states.length - 1].tick : 0;
  }

  // Scrub position (0..1) to the nearest verified state at or before it.
  stateAtFraction(fraction: number): ReplayState | null {
    if (this.states.length === 0) return null;
    const clamped = Math.max(0, Math.min(1, fraction));
    const targetTick = clamped * this.lastTick;
    return this.stateAtTick(targetTick);
  }

  // The verified state with the greatest tick <= the requested tick
  // (exact lookup, never interpolated or recomputed client-side).
  stateAtTick(tick: number): ReplayState | null {
    let lo = 0;
    let hi = this.states.length - 1;
    if (hi < 0) return null;
    if (tick <= this.states[0].tick) return this.states[0];
    while (lo < hi) {
      const mid = (lo + hi + 1) >> 1;
      if (this.states[mid].tick <= tick) lo = mid;
      else hi = mid - 1;
    }
    return this.states[lo];
  }

  markers(): TimelineMarker[] {
    const denom = this.lastTick || 1;
    return this.events.map(({ tick, event }) => ({
      tick,
      fraction: Math.max(0, Math.min(1, tick / denom)),
      kind: event.kind,
      severity: SEVERITY[event.kind] ?? "info",
      label: event.kind + (event.points ? ` +${event.points}` : "") + (event.reason ? ` (${event.reason})` : ""),
    }));
  }
}
