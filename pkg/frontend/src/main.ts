/**
 * Browser shell: connects through the WebSocket bridge, keeps a UiState
 * folded over the event stream, and re-renders on every change.
 *
 * The browser cannot open raw TCP sockets, so this module speaks the
 * same line-delimited JSON over a WebSocket and relies on
 * scripts/bridge.mjs to forward bytes to the session server.
 */

import { parseServerMessage, Snapshot, snapshotSchema } from "./protocol.js";
import { applyEvent, initialState, UiState } from "./state.js";
import { renderApp } from "./render.js";

declare const document: {
  getElementById(id: string): { innerHTML: string; value?: string } | null;
};
declare class WebSocket {
  constructor(url: string);
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  send(data: string): void;
}

interface PendingResponse {
  resolve: (payload: unknown) => void;
  reject: (err: Error) => void;
}

export class BrowserApp {
  private ws: WebSocket;
  private state: UiState | null = null;
  private nextId = 1;
  private pending = new Map<number, PendingResponse>();
  private buffer = "";

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => void this.start();
    this.ws.onmessage = (ev) => this.onChunk(ev.data);
  }

  private onChunk(chunk: string): void {
    this.buffer += chunk;
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (line) this.onLine(line);
    }
  }

  private onLine(line: string): void {
    const msg = parseServerMessage(line);
    if (msg.type === "event") {
      if (this.state) {
        this.state = applyEvent(this.state, msg.message);
        this.redraw();
      }
      return;
    }
    const id = typeof msg.message.id === "number" ? msg.message.id : null;
    if (id === null) return;
    const p = this.pending.get(id);
    if (!p) return;
    this.pending.delete(id);
    if (msg.message.ok) p.resolve(msg.message.payload);
    else p.reject(new Error(msg.message.error?.message ?? "request failed"));
  }

  private request(verb: string, args: Record<string, unknown>): Promise<unknown> {
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.ws.send(JSON.stringify({ id, verb, args }) + "\n");
    });
  }

  private async start(): Promise<void> {
    const payload = (await this.request("hello", { role: "controller" })) as {
      role: "controller" | "observer";
      snapshot: unknown;
    };
    const snap: Snapshot = snapshotSchema.parse(payload.snapshot);
    this.state = initialState(payload.role, snap);
    this.redraw();
  }

  async submit(line: string): Promise<void> {
    if (!line.trim() || !this.state) return;
    await this.request(line.trim().split(/\s+/)[0], { line: line.trim() });
    // Re-snapshot so panels that events do not cover (threads, source)
    // stay current after a movement command.
    const snap = snapshotSchema.parse(await this.request("snapshot", {}));
    this.state = { ...this.state, snapshot: snap, position: snap.position };
    this.redraw();
  }

  private redraw(): void {
    const root = document.getElementById("app");
    if (root && this.state) root.innerHTML = renderApp(this.state);
  }
}
