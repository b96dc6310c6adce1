import { describe, expect, it } from "vitest";

import {
  FORCE_LIMIT,
  MOMENT_LIMIT,
  clampWrench,
  decodeServerMessage,
  encodeCommand,
  modeCommand,
  simpleCommand,
  wrenchCommand,
} from "../src/protocol.js";

describe("protocol", () => {
  it("encodes wrench commands the server can parse", () => {
    const cmd = wrenchCommand("handle", [0, 10, 0]);
    const msg = JSON.parse(encodeCommand(cmd));
    expect(msg.kind).toBe("command");
    expect(msg.type).toBe("apply_wrench");
    expect(msg.grip).toBe("handle");
    expect(msg.force).toEqual([0, 10, 0]);
    expect(msg.v).toBe(1);
  });

  it("clamps client-side exactly like the server safety bound", () => {
    const { force, moment, clamped } = clampWrench([80, 0, 0], [0, 0, 30]);
    expect(clamped).toBe(true);
    expect(Math.hypot(...force)).toBeCloseTo(FORCE_LIMIT, 9);
    expect(Math.hypot(...moment)).toBeCloseTo(MOMENT_LIMIT, 9);
    // direction preserved
    expect(force[0]).toBeGreaterThan(0);
    expect(force[1]).toBe(0);
  });

  it("never emits a wrench command over the bound", () => {
    const cmd = wrenchCommand("g", [500, 500, 0]);
    if (cmd.type !== "apply_wrench") throw new Error("wrong type");
    expect(Math.hypot(...cmd.force)).toBeLessThanOrEqual(FORCE_LIMIT + 1e-9);
  });

  it("decodes frames and ignores unknown fields", () => {
    const msg = decodeServerMessage(
      JSON.stringify({ kind: "frame", v: 2, tick: 7, future: { a: 1 } }),
    );
    expect(msg).not.toBeNull();
    expect((msg as any).tick).toBe(7);
  });

  it("rejects malformed messages without throwing", () => {
    expect(decodeServerMessage("{oops")).toBeNull();
    expect(decodeServerMessage(JSON.stringify({ kind: "??" }))).toBeNull();
  });

  it("builds mode and transport commands", () => {
    expect(modeCommand(2, "approx_float")).toMatchObject({
      type: "set_mode",
      robot: 2,
      mode: "approx_float",
    });
    expect(simpleCommand("pause").type).toBe("pause");
  });
});
