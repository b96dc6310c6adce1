// Top-down scene construction. render_scene is a pure function of the
// latest frame plus the view state: it emits primitive draw ops that the
// canvas painter executes, which keeps everything testable without a DOM.

import { Frame, Vec3 } from "./protocol.js";

export interface View {
  cx: number; // world coords at the canvas center, m
  cy: number;
  scale: number; // px per m
  width: number;
  height: number;
  selectedGrip: string | null;
  stale: boolean;
}

export type DrawOp =
  | { op: "circle"; x: number; y: number; r: number; stroke?: string; fill?: string; width?: number; dash?: number[] }
  | { op: "line"; x1: number; y1: number; x2: number; y2: number; stroke: string; width?: number; dash?: number[] }
  | { op: "arrow"; x1: number; y1: number; x2: number; y2: number; stroke: string; width?: number }
  | { op: "poly"; pts: [number, number][]; stroke?: string; fill?: string; close?: boolean }
  | { op: "text"; x: number; y: number; text: string; fill: string; size?: number; align?: CanvasTextAlign }
  | { op: "badge"; x: number; y: number; text: string; fill: string };

export const COLORS = {
  base: "#4a6fa5",
  baseStale: "#777788",
  wrist: "#ffd166",
  payload: "#2a9d8f",
  hinge: "#e07a5f",
  force: "#e63946",
  forceClamped: "#ff9f1c",
  human: "#9b5de5",
  workspace: "#44556644",
  band: "#e6394666",
  grip: "#9b5de5",
  gripSelected: "#f15bb5",
};

export function worldToPx(view: View, x: number, y: number): [number, number] {
  // y up in the world, y down on the canvas
  return [
    view.width / 2 + (x - view.cx) * view.scale,
    view.height / 2 - (y - view.cy) * view.scale,
  ];
}

export function pxToWorld(view: View, px: number, py: number): [number, number] {
  return [
    view.cx + (px - view.width / 2) / view.scale,
    view.cy - (py - view.height / 2) / view.scale,
  ];
}

/** Arrow length for a force magnitude: log scale so 0.5 N and 50 N both read. */
export function forceArrowLength(mag: number): number {
  if (mag <= 1e-6) return 0;
  return 0.08 * Math.log10(1 + mag / 0.5);
}

function quatYaw(q: [number, number, number, number]): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

export function gripWorldPos(frame: Frame, grip: string): [number, number] | null {
  if (grip.startsWith("robot:")) {
    const i = parseInt(grip.split(":")[1], 10);
    const r = frame.robots[i];
    return r ? [r.wrist[0], r.wrist[1]] : null;
  }
  // payload grips are not in the frame; the drag layer keeps the offset
  // from the hello/scenario. Fallback: payload body 0 center.
  if (frame.payload && frame.payload.bodies.length) {
    const p = frame.payload.bodies[0].pos;
    return [p[0], p[1]];
  }
  return null;
}

export function renderScene(frame: Frame | null, view: View): DrawOp[] {
  const ops: DrawOp[] = [];
  if (!frame) {
    ops.push({ op: "text", x: view.width / 2, y: view.height / 2, text: "waiting for telemetry", fill: "#888", align: "center" });
    return ops;
  }
  const dim = view.stale;
  const baseColor = dim ? COLORS.baseStale : COLORS.base;

  // payload first (under the robots)
  if (frame.payload) {
    const bodies = frame.payload.bodies;
    for (const b of bodies) {
      const [x, y] = worldToPx(view, b.pos[0], b.pos[1]);
      const yaw = quatYaw(b.quat);
      const L = 0.45 * view.scale;
      const W = 0.07 * view.scale;
      const c = Math.cos(-yaw);
      const s = Math.sin(-yaw);
      const pts: [number, number][] = [
        [-L, -W], [L, -W], [L, W], [-L, W],
      ].map(([px, py]) => [x + px * c - py * s, y + px * s + py * c]);
      ops.push({ op: "poly", pts, fill: dim ? "#5f7f7a88" : COLORS.payload + "aa", stroke: COLORS.payload, close: true });
    }
    if (bodies.length === 2) {
      const [x1, y1] = worldToPx(view, bodies[0].pos[0], bodies[0].pos[1]);
      const [x2, y2] = worldToPx(view, bodies[1].pos[0], bodies[1].pos[1]);
      ops.push({ op: "line", x1, y1, x2, y2, stroke: COLORS.hinge, width: 2, dash: [4, 3] });
    }
    if (frame.payload.rank === 5 && frame.robots.length >= 3) {
      // collinear-wrist singularity: the team cannot torque about the line
      ops.push({ op: "badge", x: 12, y: 16, text: `singular: rank ${frame.payload.rank}`, fill: "#e63946" });
    }
  }

  for (let i = 0; i < frame.robots.length; i++) {
    const r = frame.robots[i];
    const [bx, by] = worldToPx(view, r.base[0], r.base[1]);
    const yaw = r.base[2];
    // chassis rectangle
    const L = 0.28 * view.scale;
    const W = 0.22 * view.scale;
    const c = Math.cos(-yaw);
    const s = Math.sin(-yaw);
    const pts: [number, number][] = [
      [-L, -W], [L, -W], [L, W], [-L, W],
    ].map(([px, py]) => [bx + px * c - py * s, by + px * s + py * c]);
    ops.push({ op: "poly", pts, stroke: baseColor, fill: baseColor + "33", close: true });
    ops.push({ op: "text", x: bx, y: by + 4, text: `${i}`, fill: baseColor, align: "center" });

    // workspace sphere and repulsion band around the base center
    const [rad, band] = r.workspace;
    ops.push({ op: "circle", x: bx, y: by, r: rad * view.scale, stroke: COLORS.workspace, width: 1 });
    ops.push({ op: "circle", x: bx, y: by, r: (rad - band) * view.scale, stroke: COLORS.band, width: 1, dash: [3, 4] });

    // wrist
    const [wx, wy] = worldToPx(view, r.wrist[0], r.wrist[1]);
    ops.push({ op: "circle", x: wx, y: wy, r: 4, fill: COLORS.wrist });

    // commanded force arrow (warning style when torque-clamped)
    const mag = Math.hypot(r.f_com[0], r.f_com[1], r.f_com[2]);
    const len = forceArrowLength(mag) * view.scale;
    if (len > 1) {
      const nx = r.f_com[0] / (mag || 1);
      const ny = r.f_com[1] / (mag || 1);
      ops.push({
        op: "arrow",
        x1: wx, y1: wy,
        x2: wx + nx * len, y2: wy - ny * len,
        stroke: r.clamped ? COLORS.forceClamped : COLORS.force,
        width: r.clamped ? 3 : 2,
      });
    }
  }

  // human wrenches at their grips
  for (const w of frame.wrenches) {
    const pos = gripWorldPos(frame, w.grip);
    if (!pos) continue;
    const [gx, gy] = worldToPx(view, pos[0], pos[1]);
    const selected = view.selectedGrip === w.grip;
    ops.push({ op: "circle", x: gx, y: gy, r: selected ? 7 : 5, stroke: selected ? COLORS.gripSelected : COLORS.grip, width: 2 });
    const mag = Math.hypot(w.force[0], w.force[1], w.force[2]);
    const len = forceArrowLength(mag) * view.scale;
    if (len > 1) {
      ops.push({
        op: "arrow",
        x1: gx, y1: gy,
        x2: gx + (w.force[0] / mag) * len,
        y2: gy - (w.force[1] / mag) * len,
        stroke: w.clamped ? COLORS.forceClamped : COLORS.human,
        width: w.clamped ? 3 : 2,
      });
    }
  }

  if (dim) {
    ops.push({ op: "badge", x: 12, y: 40, text: "connection stale", fill: "#777788" });
  }
  if (frame.fault) {
    ops.push({ op: "badge", x: 12, y: 64, text: `fault: ${frame.fault}`, fill: "#e63946" });
  }
  if (frame.paused) {
    ops.push({ op: "badge", x: 12, y: 88, text: "paused", fill: "#4a6fa5" });
  }
  return ops;
}
