// Bridge message protocol (v1). Mirrors docs/bridge-protocol.md; decoders
// ignore unknown fields so either side can grow.

export const PROTOCOL_VERSION = 1;
export const FORCE_LIMIT = 50.0; // N, must match the server's safety bound
export const MOMENT_LIMIT = 10.0; // N*m

export type Vec3 = [number, number, number];

export interface RobotFrame {
  base: Vec3; // x, y, yaw
  wrist: Vec3;
  theta: Vec3;
  alpha: Vec3;
  tau: Vec3;
  f_com: Vec3;
  clamped: boolean;
  mode: string;
  z0: number;
  eps: number;
  workspace: [number, number]; // sphere radius, repulsion band
}

export interface PayloadFrame {
  bodies: { pos: Vec3; quat: [number, number, number, number] }[];
  hinge: number | null;
  rank: number;
}

export interface WrenchFrame {
  grip: string;
  force: Vec3;
  moment: Vec3;
  clamped: boolean;
}

export interface Frame {
  kind: "frame";
  v: number;
  tick: number;
  t: number;
  paused: boolean;
  fault: string | null;
  payload: PayloadFrame | null;
  robots: RobotFrame[];
  wrenches: WrenchFrame[];
  grips: string[];
}

export interface Hello {
  kind: "hello";
  v: number;
  scenario: string;
  robots: number;
  grips: string[];
  rates: { [k: string]: number };
  frame_hz: number;
  safety: { force: number; moment: number };
}

export interface ErrorMsg {
  kind: "error";
  v: number;
  message: string;
}

export type ServerMessage = Frame | Hello | ErrorMsg;

export type Command =
  | { kind: "command"; v: number; type: "apply_wrench"; grip: string; force: Vec3; moment: Vec3 }
  | { kind: "command"; v: number; type: "set_mode"; robot: number; mode: string }
  | { kind: "command"; v: number; type: "pause" }
  | { kind: "command"; v: number; type: "resume" }
  | { kind: "command"; v: number; type: "reset" };

export function decodeServerMessage(data: string): ServerMessage | null {
  let msg: any;
  try {
    msg = JSON.parse(data);
  } catch {
    return null;
  }
  if (!msg || typeof msg !== "object") return null;
  if (msg.kind === "frame" || msg.kind === "hello" || msg.kind === "error") {
    return msg as ServerMessage;
  }
  return null;
}

export function clampWrench(force: Vec3, moment: Vec3): { force: Vec3; moment: Vec3; clamped: boolean } {
  const fn = Math.hypot(force[0], force[1], force[2]);
  const mn = Math.hypot(moment[0], moment[1], moment[2]);
  let clamped = false;
  let f = force;
  let m = moment;
  if (fn > FORCE_LIMIT) {
    const s = FORCE_LIMIT / fn;
    f = [force[0] * s, force[1] * s, force[2] * s];
    clamped = true;
  }
  if (mn > MOMENT_LIMIT) {
    const s = MOMENT_LIMIT / mn;
    m = [moment[0] * s, moment[1] * s, moment[2] * s];
    clamped = true;
  }
  return { force: f, moment: m, clamped };
}

export function wrenchCommand(grip: string, force: Vec3, moment: Vec3 = [0, 0, 0]): Command {
  // client-side clamp mirrors the server so the UI never requests more
  // than the safety bound
  const c = clampWrench(force, moment);
  return { kind: "command", v: PROTOCOL_VERSION, type: "apply_wrench", grip, force: c.force, moment: c.moment };
}

export function modeCommand(robot: number, mode: string): Command {
  return { kind: "command", v: PROTOCOL_VERSION, type: "set_mode", robot, mode };
}

export function simpleCommand(type: "pause" | "resume" | "reset"): Command {
  return { kind: "command", v: PROTOCOL_VERSION, type };
}

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
