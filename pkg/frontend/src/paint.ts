// Canvas painter for the scene and plot draw ops.

import { DrawOp } from "./scene.js";

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const o of ops) {
    ctx.setLineDash([]);
    switch (o.op) {
      case "circle": {
        ctx.beginPath();
        if (o.dash) ctx.setLineDash(o.dash);
        ctx.arc(o.x, o.y, o.r, 0, Math.PI * 2);
        if (o.fill) {
          ctx.fillStyle = o.fill;
          ctx.fill();
        }
        if (o.stroke) {
          ctx.strokeStyle = o.stroke;
          ctx.lineWidth = o.width ?? 1;
          ctx.stroke();
        }
        break;
      }
      case "line": {
        ctx.beginPath();
        if (o.dash) ctx.setLineDash(o.dash);
        ctx.moveTo(o.x1, o.y1);
        ctx.lineTo(o.x2, o.y2);
        ctx.strokeStyle = o.stroke;
        ctx.lineWidth = o.width ?? 1;
        ctx.stroke();
        break;
      }
      case "arrow": {
        const dx = o.x2 - o.x1;
        const dy = o.y2 - o.y1;
        const len = Math.hypot(dx, dy);
        if (len < 1e-6) break;
        const ux = dx / len;
        const uy = dy / len;
        ctx.beginPath();
        ctx.moveTo(o.x1, o.y1);
        ctx.lineTo(o.x2, o.y2);
        const hs = Math.min(8, len * 0.4);
        ctx.moveTo(o.x2, o.y2);
        ctx.lineTo(o.x2 - hs * (ux + 0.5 * uy), o.y2 - hs * (uy - 0.5 * ux));
        ctx.moveTo(o.x2, o.y2);
        ctx.lineTo(o.x2 - hs * (ux - 0.5 * uy), o.y2 - hs * (uy + 0.5 * ux));
        ctx.strokeStyle = o.stroke;
        ctx.lineWidth = o.width ?? 2;
        ctx.stroke();
        break;
      }
      case "poly": {
        if (o.pts.length < 2) break;
        ctx.beginPath();
        ctx.moveTo(o.pts[0][0], o.pts[0][1]);
        for (let i = 1; i < o.pts.length; i++) ctx.lineTo(o.pts[i][0], o.pts[i][1]);
        if (o.close) ctx.closePath();
        if (o.fill) {
          ctx.fillStyle = o.fill;
          ctx.fill();
        }
        if (o.stroke) {
          ctx.strokeStyle = o.stroke;
          ctx.lineWidth = 1.5;
          ctx.stroke();
        }
        break;
      }
      case "text": {
        ctx.fillStyle = o.fill;
        ctx.font = `${o.size ?? 12}px system-ui, sans-serif`;
        ctx.textAlign = o.align ?? "left";
        ctx.fillText(o.text, o.x, o.y);
        break;
      }
      case "badge": {
        ctx.font = "12px system-ui, sans-serif";
        const w = ctx.measureText(o.text).width + 12;
        ctx.fillStyle = o.fill;
        ctx.globalAlpha = 0.9;
        ctx.fillRect(o.x, o.y - 12, w, 18);
        ctx.globalAlpha = 1.0;
        ctx.fillStyle = "#fff";
        ctx.textAlign = "left";
        ctx.fillText(o.text, o.x + 6, o.y + 2);
        break;
      }
    }
  }
}
