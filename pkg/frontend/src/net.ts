// WebSocket client: decodes server messages into the frame store, queues
// outgoing commands, reconnects with backoff.

import { Command, Hello, decodeServerMessage, encodeCommand } from "./protocol.js";
import { FrameStore } from "./state.js";

export type NetStatus = "connecting" | "connected" | "closed";

export class BridgeClient {
  store = new FrameStore();
  hello: Hello | null = null;
  status: NetStatus = "connecting";
  lastError: string | null = null;
  private ws: WebSocket | null = null;
  private retryMs = 500;

  constructor(readonly url: string, readonly onHello?: (h: Hello) => void) {}

  connect(): void {
    this.status = "connecting";
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.status = "connected";
      this.retryMs = 500;
    };
    ws.onmessage = (ev: MessageEvent) => {
      const msg = decodeServerMessage(String(ev.data));
      if (!msg) return;
      if (msg.kind === "frame") {
        this.store.push(msg, performance.now());
      } else if (msg.kind === "hello") {
        this.hello = msg;
        this.onHello?.(msg);
      } else if (msg.kind === "error") {
        this.lastError = msg.message;
      }
    };
    ws.onclose = () => {
      this.status = "closed";
      this.ws = null;
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 5000);
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  send(cmd: Command): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(encodeCommand(cmd));
    return true;
  }

  sendAll(cmds: Command[]): void {
    for (const c of cmds) this.send(c);
  }
}
