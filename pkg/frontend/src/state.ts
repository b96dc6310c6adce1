// Frame store and plot history. Frames are independent snapshots: the
// renderer always consumes the newest one, and the store tracks how far
// the consumer trails the stream.

import { Frame } from "./protocol.js";

export class FrameStore {
  latest: Frame | null = null;
  received = 0;
  private rendered = 0;
  private lastArrival = 0;

  push(frame: Frame, now: number): void {
    this.latest = frame;
    this.received += 1;
    this.lastArrival = now;
  }

  /** Newest frame for rendering; marks the stream consumed. */
  take(): Frame | null {
    if (this.latest !== null) this.rendered = this.received;
    return this.latest;
  }

  /** Frames that arrived but have not been rendered yet. */
  backlog(): number {
    return this.received - this.rendered;
  }

  /** True when no frame has arrived for a while (connection stale). */
  stale(now: number, timeoutMs = 1000): boolean {
    return this.received === 0 || now - this.lastArrival > timeoutMs;
  }
}

export class Ring {
  // bounded history for the strip charts (default 30 s at 30 Hz)
  private buf: Float64Array;
  private n = 0;
  private head = 0;

  constructor(readonly capacity = 900) {
    this.buf = new Float64Array(capacity);
  }

  push(v: number): void {
    this.buf[this.head] = v;
    this.head = (this.head + 1) % this.capacity;
    if (this.n < this.capacity) this.n += 1;
  }

  get length(): number {
    return this.n;
  }

  /** Values oldest to newest. */
  values(): number[] {
    const out: number[] = [];
    const start = (this.head - this.n + this.capacity) % this.capacity;
    for (let i = 0; i < this.n; i++) {
      out.push(this.buf[(start + i) % this.capacity]);
    }
    return out;
  }
}
