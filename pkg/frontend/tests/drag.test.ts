import { describe, expect, it } from "vitest";

import { FORCE_LIMIT } from "../src/protocol.js";
import { DragState, dragWrench, endDrag, moveDrag, springForce, startDrag } from "../src/drag.js";

const idle: DragState = { grip: "handle", active: false, cursor: [0, 0] };

describe("drag-to-wrench", () => {
  it("pointer exactly on the grip produces zero force", () => {
    const st = startDrag(idle, "handle", [0.5, 0.5]);
    const cmd = dragWrench(st, [0.5, 0.5]);
    if (!cmd || cmd.type !== "apply_wrench") throw new Error("expected wrench");
    expect(cmd.force).toEqual([0, 0, 0]);
  });

  it("0.1 m of separation at 200 N/m pulls with 20 N toward the cursor", () => {
    const st = startDrag(idle, "handle", [0.1, 0.0]);
    const cmd = dragWrench(st, [0.0, 0.0]);
    if (!cmd || cmd.type !== "apply_wrench") throw new Error("expected wrench");
    expect(cmd.force[0]).toBeCloseTo(20.0, 9);
    expect(cmd.force[1]).toBeCloseTo(0.0, 9);
  });

  it("clamps long drags to the safety bound", () => {
    const st = startDrag(idle, "handle", [10, 0]);
    const cmd = dragWrench(st, [0, 0]);
    if (!cmd || cmd.type !== "apply_wrench") throw new Error("expected wrench");
    expect(Math.hypot(...cmd.force)).toBeCloseTo(FORCE_LIMIT, 9);
  });

  it("released pointer commands a zero wrench", () => {
    let st = startDrag(idle, "handle", [0.3, 0.0]);
    st = endDrag(st);
    const cmd = dragWrench(st, [0, 0]);
    if (!cmd || cmd.type !== "apply_wrench") throw new Error("expected wrench");
    expect(cmd.force).toEqual([0, 0, 0]);
  });

  it("is a no-op without a selected grip", () => {
    const st = startDrag({ grip: null, active: false, cursor: [0, 0] }, null, [1, 1]);
    expect(st.active).toBe(false);
    expect(dragWrench(st, [0, 0])).toBeNull();
  });

  it("tracks pointer movement only while active", () => {
    let st = startDrag(idle, "handle", [0, 0]);
    st = moveDrag(st, [0.2, 0.1]);
    expect(st.cursor).toEqual([0.2, 0.1]);
    st = endDrag(st);
    st = moveDrag(st, [9, 9]);
    expect(st.cursor).toEqual([0.2, 0.1]);
  });

  it("spring law matches the documented hand model", () => {
    expect(springForce([0.05, 0], [0, 0])[0]).toBeCloseTo(10.0, 9);
  });
});
