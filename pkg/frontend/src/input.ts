// Keyboard fallback: arrow keys ramp synthetic wrist angles so the games are
// playable (and testable) without a hand-tracking device. Up/down drive
// flexion/extension, left/right drive deviation; releasing decays to neutral.

import { Hand, HandFrame, poseFromAngles } from "./protocol.js";

export interface KeyboardFallbackOptions {
  rampDegPerS?: number;   // angle change per second while a key is held
  decayDegPerS?: number;  // return-to-neutral speed with no key held
  maxDeg?: number;        // angle magnitude cap
  hands?: Hand[];         // which hands the synthetic frames carry
  separationCm?: number;  // palm distance when both hands are present
}

const KEY_AXES: Record<string, { axis: "fe" | "dev"; sign: 1 | -1 }> = {
  ArrowUp: { axis: "fe", sign: 1 },
  ArrowDown: { axis: "fe", sign: -1 },
  ArrowRight: { axis: "dev", sign: 1 },
  ArrowLeft: { axis: "dev", sign: -1 },
};

export class KeyboardFallback {
  private readonly down = new Set<string>();
  private fe = 0;
  private dev = 0;
  private readonly rampDegPerS: number;
  private readonly decayDegPerS: number;
  private readonly maxDeg: number;
  private readonly hands: Hand[];
  private separationCm: number;

  constructor(opts: KeyboardFallbackOptions = {}) {
    this.rampDegPerS = opts.rampDegPerS ?? 40;
    this.decayDegPerS = opts.decayDegPerS ?? 60;
    this.maxDeg = opts.maxDeg ?? 60;
    this.hands = opts.hands ?? ["right"];
    this.separationCm = opts.separationCm ?? 20;
  }

  attach(target: Window): void {
    target.addEventListener("keydown", (e) => {
      if (e.code in KEY_AXES) {
        e.preventDefault();
        this.setKey(e.code, true);
      }
    });
    target.addEventListener("keyup", (e) => this.setKey(e.code, false));
    target.addEventListener("blur", () => this.down.clear());
  }

  // Shared by DOM listeners and tests.
  setKey(code: string, isDown: boolean): void {
    if (!(code in KEY_AXES)) return;
    if (isDown) this.down.add(code);
    else this.down.delete(code);
  }

  setSeparation(cm: number): void {
    this.separationCm = cm;
  }

  get angles(): { flexionExtension: number; deviation: number } {
    return { flexionExtension: this.fe, deviation: this.dev };
  }

  private axisInput(axis: "fe" | "dev"): number {
    let sum = 0;
    for (const code of this.down) {
      const m = KEY_AXES[code];
      if (m && m.axis === axis) sum += m.sign;
    }
    return Math.sign(sum); // opposing keys cancel to zero net ramp
  }

  update(dtMs: number): void {
    const dt = dtMs / 1000;
    this.fe = this.step(this.fe, this.axisInput("fe"), dt);
    this.dev = this.step(this.dev, this.axisInput("dev"), dt);
  }

  private step(value: number, input: number, dt: number): number {
    if (input !== 0) {
      const next = value + input * this.rampDegPerS * dt;
      return Math.max(-this.maxDeg, Math.min(this.maxDeg, next));
    }
    const drop = this.decayDegPerS * dt;
    if (Math.abs(value) <= drop) return 0;
    return value - Math.sign(value) * drop;
  }

  frame(timestampMs: number): HandFrame {
    const sep = this.separationCm / 2;
    const pose = (hand: Hand) =>
      poseFromAngles(this.fe, this.dev, [hand === "left" ? -sep : sep, 20, 0]);
    return {
      timestamp: timestampMs,
      left: this.hands.includes("left") ? pose("left") : null,
      right: this.hands.includes("right") ? pose("right") : null,
    };
  }
}
