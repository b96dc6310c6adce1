import { describe, expect, it } from "vitest";

import { COLORS, View, forceArrowLength, pxToWorld, renderScene, worldToPx } from "../src/scene.js";
import { makeFrame, makeRobot } from "./helpers.js";

function view(over: Partial<View> = {}): View {
  return {
    cx: 0, cy: 0, scale: 200, width: 800, height: 600,
    selectedGrip: null, stale: false, ...over,
  };
}

describe("renderScene", () => {
  it("is a pure function of frame and view", () => {
    const f = makeFrame();
    const v = view();
    expect(renderScene(f, v)).toEqual(renderScene(f, v));
  });

  it("draws no force arrows when all forces are zero", () => {
    const ops = renderScene(makeFrame(), view());
    expect(ops.filter((o) => o.op === "arrow")).toHaveLength(0);
  });

  it("draws a commanded-force arrow when f_com is nonzero", () => {
    const f = makeFrame({ robots: [makeRobot({ f_com: [0, 30, 0] })] });
    const arrows = renderScene(f, view()).filter((o) => o.op === "arrow");
    expect(arrows).toHaveLength(1);
    expect((arrows[0] as any).stroke).toBe(COLORS.force);
  });

  it("uses the warning style when the torque clamp flag is set", () => {
    const f = makeFrame({
      robots: [makeRobot({ f_com: [0, 30, 0], clamped: true })],
    });
    const arrows = renderScene(f, view()).filter((o) => o.op === "arrow");
    expect((arrows[0] as any).stroke).toBe(COLORS.forceClamped);
  });

  it("shows the singularity badge when rank reports 5 for three robots", () => {
    const f = makeFrame({
      robots: [makeRobot(), makeRobot(), makeRobot()],
      payload: { bodies: [{ pos: [0, 0, 0.42], quat: [1, 0, 0, 0] }], hinge: null, rank: 5 },
    });
    const badges = renderScene(f, view()).filter((o) => o.op === "badge");
    expect(badges.some((b) => (b as any).text.includes("rank 5"))).toBe(true);
    // full-rank team: no badge
    const ok = renderScene(makeFrame({ robots: [makeRobot(), makeRobot(), makeRobot()] }), view());
    expect(ok.filter((o) => o.op === "badge")).toHaveLength(0);
  });

  it("marks the scene when the connection is stale", () => {
    const ops = renderScene(makeFrame(), view({ stale: true }));
    expect(ops.some((o) => o.op === "badge" && (o as any).text.includes("stale"))).toBe(true);
  });

  it("draws workspace sphere and repulsion band per robot", () => {
    const ops = renderScene(makeFrame(), view());
    const circles = ops.filter((o) => o.op === "circle");
    // sphere + band + wrist dot
    expect(circles.length).toBeGreaterThanOrEqual(3);
  });

  it("round-trips world and pixel coordinates", () => {
    const v = view({ cx: 0.3, cy: -0.2, scale: 150 });
    const [px, py] = worldToPx(v, 1.0, 0.5);
    const [wx, wy] = pxToWorld(v, px, py);
    expect(wx).toBeCloseTo(1.0, 12);
    expect(wy).toBeCloseTo(0.5, 12);
  });

  it("scales force arrows logarithmically", () => {
    expect(forceArrowLength(0)).toBe(0);
    const small = forceArrowLength(1);
    const big = forceArrowLength(100);
    expect(big).toBeGreaterThan(small);
    expect(big / small).toBeLessThan(10);
  });
});
