import { describe, expect, it } from "vitest";

import { KeyboardFallback } from "../src/input.js";
import { anglesFromDirection } from "../src/protocol.js";

function tickFor(kb: KeyboardFallback, ms: number, step = 10): void {
  for (let t = 0; t < ms; t += step) kb.update(step);
}

describe("keyboard fallback", () => {
  it("ramps extension while up is held", () => {
    const kb = new KeyboardFallback({ rampDegPerS: 40 });
    kb.setKey("ArrowUp", true);
    tickFor(kb, 1000);
    expect(kb.angles.flexionExtension).toBeCloseTo(40, 5);
  });

  it("decays to neutral on release", () => {
    const kb = new KeyboardFallback({ rampDegPerS: 40, decayDegPerS: 60 });
    kb.setKey("ArrowUp", true);
    tickFor(kb, 1000);
    kb.setKey("ArrowUp", false);
    tickFor(kb, 2000);
    expect(kb.angles.flexionExtension).toBe(0);
  });

  it("opposing keys cancel to zero net ramp", () => {
    const kb = new KeyboardFallback({ rampDegPerS: 40, decayDegPerS: 0.0001 });
    kb.setKey("ArrowUp", true);
    kb.setKey("ArrowDown", true);
    tickFor(kb, 1000);
    expect(Math.abs(kb.angles.flexionExtension)).toBeLessThan(0.5);
  });

  it("clamps at the configured maximum", () => {
    const kb = new KeyboardFallback({ rampDegPerS: 100, maxDeg: 50 });
    kb.setKey("ArrowRight", true);
    tickFor(kb, 3000);
    expect(kb.angles.deviation).toBe(50);
  });

  it("produces frames whose direction encodes the ramped angles", () => {
    const kb = new KeyboardFallback({ rampDegPerS: 40 });
    kb.setKey("ArrowUp", true);
    kb.setKey("ArrowLeft", true);
    tickFor(kb, 500);
    const frame = kb.frame(500);
    expect(frame.left).toBeNull();
    const angles = anglesFromDirection(frame.right!.hand_direction);
    expect(angles.flexion_extension).toBeCloseTo(20, 4);
    expect(angles.deviation).toBeCloseTo(-20, 4);
  });

  it("two-hand mode separates the palms", () => {
    const kb = new KeyboardFallback({ hands: ["left", "right"], separationCm: 22 });
    const frame = kb.frame(0);
    const dx = frame.right!.palm_position[0] - frame.left!.palm_position[0];
    expect(dx).toBeCloseTo(22, 6);
  });
});
