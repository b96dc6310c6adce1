// Mode panel: per-robot and team-wide float mode toggles plus the
// pause/resume/reset transport. Pure command builders; main.ts wires them
// to buttons.

import { Command, Frame, modeCommand, simpleCommand } from "./protocol.js";

export const MODES = ["float", "approx_float", "gravity_comp"] as const;

export function setRobotMode(robot: number, mode: string): Command[] {
  return [modeCommand(robot, mode)];
}

export function setTeamMode(frame: Frame | null, mode: string): Command[] {
  if (!frame) return [];
  return frame.robots.map((_, i) => modeCommand(i, mode));
}

export function transport(kind: "pause" | "resume" | "reset"): Command[] {
  return [simpleCommand(kind)];
}

export interface RobotStatus {
  index: number;
  mode: string;
  clamped: boolean;
  z: number;
  z0: number;
  eps: number;
  nearBand: boolean; // |z0 - z| close to the re-anchor threshold
}

export function robotStatus(frame: Frame): RobotStatus[] {
  return frame.robots.map((r, i) => ({
    index: i,
    mode: r.mode,
    clamped: r.clamped,
    z: r.wrist[2],
    z0: r.z0,
    eps: r.eps,
    nearBand: r.mode === "approx_float" && Math.abs(r.z0 - r.wrist[2]) > 0.8 * r.eps,
  }));
}
