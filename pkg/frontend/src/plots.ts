// Strip charts fed from per-frame ring buffers: wrist heights and force
// magnitudes over the last 30 s. Pure op construction, painted by paint.ts.

import { Frame } from "./protocol.js";
import { Ring } from "./state.js";
import { DrawOp } from "./scene.js";

export class PlotBuffers {
  z: Ring[] = [];
  force: Ring[] = [];
  human: Ring = new Ring();

  sample(frame: Frame): void {
    while (this.z.length < frame.robots.length) {
      this.z.push(new Ring());
      this.force.push(new Ring());
    }
    frame.robots.forEach((r, i) => {
      this.z[i].push(r.wrist[2]);
      this.force[i].push(Math.hypot(r.f_com[0], r.f_com[1], r.f_com[2]));
    });
    let h = 0;
    for (const w of frame.wrenches) {
      h += Math.hypot(w.force[0], w.force[1], w.force[2]);
    }
    this.human.push(h);
  }
}

const SERIES_COLORS = ["#4a6fa5", "#2a9d8f", "#e07a5f", "#9b5de5"];

export function stripChart(
  series: { label: string; ring: Ring; color?: string }[],
  x0: number, y0: number, width: number, height: number,
  title: string,
): DrawOp[] {
  const ops: DrawOp[] = [];
  ops.push({ op: "poly", pts: [[x0, y0], [x0 + width, y0], [x0 + width, y0 + height], [x0, y0 + height]], stroke: "#334", close: true });
  ops.push({ op: "text", x: x0 + 4, y: y0 + 12, text: title, fill: "#99a", size: 11 });
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s.ring.values()) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!isFinite(lo)) return ops;
  if (hi - lo < 1e-9) {
    hi += 0.5;
    lo -= 0.5;
  }
  const pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  series.forEach((s, si) => {
    const vals = s.ring.values();
    if (vals.length < 2) return;
    const pts: [number, number][] = vals.map((v, i) => [
      x0 + (i / (s.ring.capacity - 1)) * width,
      y0 + height - ((v - lo) / (hi - lo)) * height,
    ]);
    ops.push({ op: "poly", pts, stroke: s.color ?? SERIES_COLORS[si % SERIES_COLORS.length], close: false });
  });
  ops.push({ op: "text", x: x0 + width - 4, y: y0 + 12, text: hi.toFixed(2), fill: "#667", size: 10, align: "right" });
  ops.push({ op: "text", x: x0 + width - 4, y: y0 + height - 4, text: lo.toFixed(2), fill: "#667", size: 10, align: "right" });
  return ops;
}
