/**
 * Line-delimited JSON client for the fred session server.
 *
 * Frames requests as {id, verb, args} and correlates responses by id.
 * Events are pushed to registered listeners in arrival order.  The
 * transport is a plain TCP socket; in a browser deployment the same
 * framing rides over a WebSocket-to-TCP bridge (scripts/bridge.mjs).
 */

import * as net from "node:net";
import {
  parseServerMessage,
  Snapshot,
  snapshotSchema,
  WireEvent,
  WireResponse,
} from "./protocol.js";

export class WireError extends Error {
  code: string;

  constructor(code: string, message: string) {
    super(message);
    this.code = code;
  }
}

interface Pending {
  resolve: (payload: unknown) => void;
  reject: (err: Error) => void;
}

export class WireClient {
  private socket: net.Socket;
  private buffer = "";
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private eventListeners: Array<(ev: WireEvent) => void> = [];
  private closed = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => this.onData(chunk));
    socket.on("close", () => this.onClose());
    socket.on("error", () => this.onClose());
  }

  static connect(host: string, port: number): Promise<WireClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () => {
        socket.off("error", reject);
        resolve(new WireClient(socket));
      });
      socket.once("error", reject);
    });
  }

  onEvent(listener: (ev: WireEvent) => void): void {
    this.eventListeners.push(listener);
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (!line) continue;
      this.onLine(line);
    }
  }

  private onLine(line: string): void {
    const msg = parseServerMessage(line);
    if (msg.type === "event") {
      for (const listener of this.eventListeners) listener(msg.message);
      return;
    }
    this.settle(msg.message);
  }

  private settle(res: WireResponse): void {
    const id = typeof res.id === "number" ? res.id : null;
    if (id === null) return; // unsolicited error (e.g. malformed input)
    const p = this.pending.get(id);
    if (!p) return;
    this.pending.delete(id);
    if (res.ok) {
      p.resolve(res.payload);
    } else {
      const err = res.error ?? { code: "Unknown", message: "request failed" };
      p.reject(new WireError(err.code, err.message));
    }
  }

  private onClose(): void {
    if (this.closed) return;
    this.closed = true;
    for (const p of this.pending.values()) {
      p.reject(new WireError("ConnectionClosed", "connection closed"));
    }
    this.pending.clear();
  }

  request(verb: string, args: Record<string, unknown> = {}): Promise<unknown> {
    if (this.closed) {
      return Promise.reject(new WireError("ConnectionClosed", "connection closed"));
    }
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.socket.write(JSON.stringify({ id, verb, args }) + "\n");
    });
  }

  async hello(role: "controller" | "observer"): Promise<Snapshot> {
    const payload = (await this.request("hello", { role })) as {
      role: string;
      snapshot: unknown;
    };
    return snapshotSchema.parse(payload.snapshot);
  }

  async snapshot(): Promise<Snapshot> {
    return snapshotSchema.parse(await this.request("snapshot"));
  }

  /** Run one debugger command line; resolves to its textual output. */
  async command(line: string): Promise<string> {
    const payload = (await this.request(line.split(/\s+/)[0], { line })) as {
      output: string;
    };
    return payload.output;
  }

  async close(): Promise<void> {
    try {
      await this.request("bye");
    } catch {
      // server may close the socket before answering; that is fine
    }
    this.socket.destroy();
    this.onClose();
  }
}
