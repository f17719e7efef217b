import { describe, expect, it } from "vitest";

import { FrameChannel, frameChannelUrl, type SocketLike } from "../src/socket.js";
import type { PushMessage } from "../src/types.js";

class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  closed = false;
  close(): void {
    this.closed = true;
  }
}

function harness() {
  const sockets: FakeSocket[] = [];
  const scheduled: Array<{ fn: () => void; ms: number }> = [];
  const messages: PushMessage[] = [];
  const statuses: boolean[] = [];
  const channel = new FrameChannel(
    "ws://x/frames",
    {
      onMessage: (m) => messages.push(m),
      onStatus: (c) => statuses.push(c),
      baseBackoffMs: 100,
      maxBackoffMs: 1000,
      schedule: (fn, ms) => scheduled.push({ fn, ms }),
    },
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
  );
  return { channel, sockets, scheduled, messages, statuses };
}

describe("FrameChannel", () => {
  it("dispatches parsed messages and tolerates malformed ones", () => {
    const h = harness();
    h.channel.connect();
    h.sockets[0].onopen?.();
    h.sockets[0].onmessage?.({ data: '{"type":"answer","t":1,"speaker":null,"text":"q","answer":{"text":"a","grounded_object":null}}' });
    h.sockets[0].onmessage?.({ data: "{broken" });
    expect(h.messages.length).toBe(1);
    expect(h.statuses).toEqual([true]);
  });

  it("reconnects with exponential backoff and resets after success", () => {
    const h = harness();
    h.channel.connect();
    h.sockets[0].onclose?.();
    expect(h.scheduled[0].ms).toBe(100);
    h.scheduled[0].fn(); // reconnect attempt 2
    h.sockets[1].onclose?.();
    expect(h.scheduled[1].ms).toBe(200);
    h.scheduled[1].fn();
    h.sockets[2].onclose?.();
    expect(h.scheduled[2].ms).toBe(400);
    h.scheduled[2].fn();
    h.sockets[3].onopen?.(); // success resets the ladder
    h.sockets[3].onclose?.();
    expect(h.scheduled[3].ms).toBe(100);
  });

  it("caps the backoff", () => {
    const h = harness();
    h.channel.connect();
    for (let i = 0; i < 8; i++) {
      h.sockets[i].onclose?.();
      h.scheduled[i].fn();
    }
    expect(Math.max(...h.scheduled.map((s) => s.ms))).toBe(1000);
  });

  it("flags disconnection for the stale banner", () => {
    const h = harness();
    h.channel.connect();
    h.sockets[0].onopen?.();
    h.sockets[0].onclose?.();
    expect(h.statuses).toEqual([true, false]);
  });

  it("stop() closes and stops reconnecting", () => {
    const h = harness();
    h.channel.connect();
    h.channel.stop();
    expect(h.sockets[0].closed).toBe(true);
    h.sockets[0].onclose?.();
    expect(h.scheduled.length).toBe(0);
  });
});

describe("frameChannelUrl", () => {
  it("maps http bases to ws", () => {
    expect(frameChannelUrl("http://127.0.0.1:8420")).toBe("ws://127.0.0.1:8420/frames");
    expect(frameChannelUrl("https://host")).toBe("wss://host/frames");
  });
});
