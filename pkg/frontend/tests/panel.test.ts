import { describe, expect, it } from "vitest";

import { robotStatus, setRobotMode, setTeamMode, transport } from "../src/panel.js";
import { makeFrame, makeRobot } from "./helpers.js";

describe("mode panel", () => {
  it("team toggle emits one set_mode per robot", () => {
    const frame = makeFrame({ robots: [makeRobot(), makeRobot(), makeRobot()] });
    const cmds = setTeamMode(frame, "approx_float");
    expect(cmds).toHaveLength(3);
    cmds.forEach((c, i) => {
      expect(c).toMatchObject({ type: "set_mode", robot: i, mode: "approx_float" });
    });
    expect(setTeamMode(null, "float")).toEqual([]);
  });

  it("single-robot toggle targets only that robot", () => {
    const cmds = setRobotMode(1, "float");
    expect(cmds).toHaveLength(1);
    expect(cmds[0]).toMatchObject({ type: "set_mode", robot: 1 });
  });

  it("pause and resume round trip", () => {
    expect(transport("pause")[0].type).toBe("pause");
    expect(transport("resume")[0].type).toBe("resume");
    expect(transport("reset")[0].type).toBe("reset");
  });

  it("surfaces the approximate-float set-height band", () => {
    const frame = makeFrame({
      robots: [makeRobot({ mode: "approx_float", z0: 0.42, wrist: [0, 0, 0.394] })],
    });
    const st = robotStatus(frame)[0];
    expect(st.z0).toBe(0.42);
    expect(st.nearBand).toBe(true);   // |z0 - z| = 0.026 > 0.8 * 0.03
    const calm = robotStatus(makeFrame())[0];
    expect(calm.nearBand).toBe(false);
  });
});
