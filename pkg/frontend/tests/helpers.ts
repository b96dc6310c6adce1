import { Frame, RobotFrame } from "../src/protocol.js";

export function makeRobot(over: Partial<RobotFrame> = {}): RobotFrame {
  return {
    base: [0, 0, 0],
    wrist: [0, 0, 0.42],
    theta: [0.64, 0.64, 0.64],
    alpha: [0, 0, 0],
    tau: [0, 0, 0],
    f_com: [0, 0, 0],
    clamped: false,
    mode: "float",
    z0: 0.42,
    eps: 0.03,
    workspace: [0.15, 0.02],
    ...over,
  };
}

export function makeFrame(over: Partial<Frame> = {}): Frame {
  return {
    kind: "frame",
    v: 1,
    tick: 0,
    t: 0,
    paused: false,
    fault: null,
    payload: {
      bodies: [{ pos: [0, 0, 0.42], quat: [1, 0, 0, 0] }],
      hinge: null,
      rank: 6,
    },
    robots: [makeRobot()],
    wrenches: [],
    grips: ["handle"],
    ...over,
  };
}
