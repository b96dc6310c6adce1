// Cockpit wiring: socket, canvas render loop, drag interaction, panels.

import { BridgeClient } from "./net.js";
import { DragState, dragWrench, endDrag, moveDrag, startDrag } from "./drag.js";
import { Frame } from "./protocol.js";
import { PlotBuffers, stripChart } from "./plots.js";
import { View, gripWorldPos, pxToWorld, renderScene } from "./scene.js";
import { paint } from "./paint.js";
import { MODES, robotStatus, setTeamMode, transport } from "./panel.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const plotCanvas = document.getElementById("plots") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLElement;
const gripSelect = document.getElementById("grip") as HTMLSelectElement;
const robotsEl = document.getElementById("robots") as HTMLElement;
const toastEl = document.getElementById("toast") as HTMLElement;

const proto = location.protocol === "https:" ? "wss:" : "ws:";
const url = `${proto}//${location.host}/`;
const client = new BridgeClient(url, (hello) => {
  gripSelect.innerHTML = "";
  for (const g of hello.grips) {
    const opt = document.createElement("option");
    opt.value = g;
    opt.textContent = g;
    gripSelect.appendChild(opt);
  }
  drag = { ...drag, grip: hello.grips[0] ?? null };
  statusEl.textContent = `${hello.scenario} | ${hello.robots} robots`;
});
client.connect();

let drag: DragState = { grip: null, active: false, cursor: [0, 0] };
const plots = new PlotBuffers();
let lastSampledTick = -1;
let maxBacklog = 0;

const view: View = {
  cx: 0, cy: 0, scale: 220,
  width: canvas.width, height: canvas.height,
  selectedGrip: null, stale: true,
};

gripSelect.addEventListener("change", () => {
  drag = { ...drag, grip: gripSelect.value || null, active: false };
});

canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const cursor = pxToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
  drag = startDrag(drag, drag.grip, cursor);
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (!drag.active) return;
  const rect = canvas.getBoundingClientRect();
  drag = moveDrag(drag, pxToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top));
});
canvas.addEventListener("pointerup", () => {
  drag = endDrag(drag);
  const cmd = dragWrench(drag, null);
  if (cmd) client.send(cmd);
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  view.scale = Math.max(40, Math.min(800, view.scale * (ev.deltaY < 0 ? 1.15 : 0.87)));
});

function toast(msg: string): void {
  toastEl.textContent = msg;
  toastEl.classList.add("show");
  setTimeout(() => toastEl.classList.remove("show"), 2500);
}

for (const kind of ["pause", "resume", "reset"] as const) {
  document.getElementById(`btn-${kind}`)!.addEventListener("click", () => {
    client.sendAll(transport(kind));
  });
}
for (const mode of MODES) {
  document.getElementById(`btn-team-${mode}`)!.addEventListener("click", () => {
    client.sendAll(setTeamMode(client.store.latest, mode));
  });
}

function renderRobotPanel(frame: Frame): void {
  const rows = robotStatus(frame).map((r) => {
    const band = r.mode === "approx_float"
      ? ` z0=${r.z0.toFixed(3)} (±${r.eps.toFixed(2)})${r.nearBand ? " ⚠ re-anchor" : ""}`
      : "";
    const clamp = r.clamped ? " [torque clamped]" : "";
    return `<div class="robot"><b>#${r.index}</b> ${r.mode}${band}${clamp}</div>`;
  });
  robotsEl.innerHTML = rows.join("");
}

function tick(): void {
  maxBacklog = Math.max(maxBacklog, client.store.backlog());
  const frame = client.store.take();
  view.stale = client.store.stale(performance.now());
  view.selectedGrip = drag.grip;

  if (frame && frame.tick !== lastSampledTick) {
    plots.sample(frame);
    lastSampledTick = frame.tick;
    // payload follows the view center softly so the team stays on screen
    if (frame.payload && frame.payload.bodies.length) {
      const p = frame.payload.bodies[0].pos;
      view.cx += 0.05 * (p[0] - view.cx);
      view.cy += 0.05 * (p[1] - view.cy);
    } else if (frame.robots.length) {
      view.cx += 0.05 * (frame.robots[0].base[0] - view.cx);
      view.cy += 0.05 * (frame.robots[0].base[1] - view.cy);
    }
    renderRobotPanel(frame);
    if (client.lastError) {
      toast(client.lastError);
      client.lastError = null;
    }
  }

  // drag spring follows the live grip position
  if (drag.active && frame && drag.grip) {
    const pos = gripWorldPos(frame, drag.grip);
    const cmd = dragWrench(drag, pos);
    if (cmd) client.send(cmd);
  }

  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  paint(ctx, renderScene(frame, view));
  if (drag.active && frame && drag.grip) {
    const pos = gripWorldPos(frame, drag.grip);
    if (pos) {
      const [gx, gy] = [pos[0], pos[1]];
      const a = ((): [number, number] => {
        const [x, y] = [gx, gy];
        return [view.width / 2 + (x - view.cx) * view.scale,
                view.height / 2 - (y - view.cy) * view.scale];
      })();
      const b: [number, number] = [
        view.width / 2 + (drag.cursor[0] - view.cx) * view.scale,
        view.height / 2 - (drag.cursor[1] - view.cy) * view.scale];
      paint(ctx, [{ op: "line", x1: a[0], y1: a[1], x2: b[0], y2: b[1], stroke: "#f15bb5", width: 1, dash: [5, 4] }]);
    }
  }

  const pctx = plotCanvas.getContext("2d")!;
  pctx.clearRect(0, 0, plotCanvas.width, plotCanvas.height);
  const w = plotCanvas.width;
  paint(pctx, [
    ...stripChart(plots.z.map((r, i) => ({ label: `z${i}`, ring: r })), 0, 0, w, 86, "wrist height (m)"),
    ...stripChart(plots.force.map((r, i) => ({ label: `f${i}`, ring: r })), 0, 96, w, 86, "commanded |f| (N)"),
    ...stripChart([{ label: "human", ring: plots.human, color: "#9b5de5" }], 0, 192, w, 86, "human |f| (N)"),
  ]);

  const lag = client.store.backlog();
  statusEl.dataset.net = client.status;
  document.getElementById("lag")!.textContent =
    `${client.status} | backlog ${lag} (max ${maxBacklog})`;

  requestAnimationFrame(tick);
}

requestAnimationFrame(tick);
