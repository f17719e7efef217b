/** Push channel client: subscribes to /frames, feeds the store, reconnects
 * with exponential backoff, and flags staleness while disconnected. */

import type { PushMessage } from "./types.js";

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface FrameChannelOptions {
  onMessage: (msg: PushMessage) => void;
  onStatus: (connected: boolean) => void;
  baseBackoffMs?: number;
  maxBackoffMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

export class FrameChannel {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private stopped = false;

  constructor(
    private url: string,
    private opts: FrameChannelOptions,
    private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    if (this.stopped) return;
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.attempts = 0;
      this.opts.onStatus(true);
    };
    sock.onclose = () => {
      this.opts.onStatus(false);
      this.scheduleReconnect();
    };
    sock.onmessage = (ev) => {
      let msg: PushMessage;
      try {
        msg = JSON.parse(ev.data) as PushMessage;
      } catch {
        return; // tolerate malformed pushes
      }
      this.opts.onMessage(msg);
    };
  }

  backoffMs(): number {
    const base = this.opts.baseBackoffMs ?? 500;
    const cap = this.opts.maxBackoffMs ?? 15000;
    return Math.min(base * 2 ** this.attempts, cap);
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const wait = this.backoffMs();
    this.attempts += 1;
    const schedule = this.opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    schedule(() => this.connect(), wait);
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }
}

export function frameChannelUrl(base: string): string {
  if (base.startsWith("http")) return base.replace(/^http/, "ws") + "/frames";
  const proto = typeof location !== "undefined" && location.protocol === "https:" ? "wss" : "ws";
  const host = typeof location !== "undefined" ? location.host : "127.0.0.1:8420";
  return `${proto}://${host}/frames`;
}
