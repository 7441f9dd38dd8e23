import { describe, expect, it } from "vitest";

import { OperatorClient, SocketLike } from "../src/client.js";
import { projectBox } from "../src/projection.js";
import { IDENTITY_POSE } from "../src/projection.js";
import type { Intrinsics, ObjectEntry } from "../src/protocol.js";

const INTR: Intrinsics = { fx: 100, fy: 100, cx: 32, cy: 18, width: 64, height: 36 };

class FakeSocket implements SocketLike {
  sent: string[] = [];
  binaryType = "blob";
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.onclose?.();
  }
}

function entry(id: number, center: [number, number, number],
               size: [number, number, number],
               state: "public" | "private" = "public"): ObjectEntry {
  return { id, class: `obj-${id}`, state, center, size, stale: false };
}

function connectedClient() {
  const sockets: FakeSocket[] = [];
  const client = new OperatorClient(() => {
    const s = new FakeSocket();
    sockets.push(s);
    return s;
  }, {}, 0);
  client.connect();
  sockets[0].onopen?.();
  return { client, sockets };
}

function update(client: OperatorClient, frameId: number, objects: ObjectEntry[]) {
  client.handleMessage(JSON.stringify({ type: "objects", frame_id: frameId, objects }));
}

function project(client: OperatorClient, objects: ObjectEntry[]) {
  return objects.map((o) => projectBox(o, IDENTITY_POSE, INTR, 2));
}

describe("click to toggle", () => {
  it("emits exactly one toggle for the clicked box", () => {
    const { client, sockets } = connectedClient();
    const objs = [entry(7, [0, 0, 2], [0.4, 0.3, 0.1])];
    update(client, 0, objs);
    const boxes = project(client, client.store.entries());
    // center of the box projects to the principal point * display scale
    const id = client.clickAt(64, 36, boxes);
    expect(id).toBe(7);
    expect(sockets[0].sent).toEqual([JSON.stringify({ type: "toggle", id: 7 })]);
  });

  it("click in the overlap picks the nearer box (depth tie-break)", () => {
    const { client, sockets } = connectedClient();
    const near = entry(1, [0, 0, 1], [0.3, 0.3, 0.1]);
    const far = entry(2, [0.05, 0, 2.5], [0.8, 0.8, 0.1]);
    update(client, 0, [near, far]);
    const boxes = project(client, client.store.entries());
    const id = client.clickAt(64, 36, boxes); // inside both projections
    expect(id).toBe(1);
    expect(sockets[0].sent).toHaveLength(1);
  });

  it("click on empty space sends nothing", () => {
    const { client, sockets } = connectedClient();
    update(client, 0, [entry(1, [0, 0, 1], [0.1, 0.1, 0.05])]);
    const boxes = project(client, client.store.entries());
    const id = client.clickAt(2, 2, boxes);
    expect(id).toBeNull();
    expect(sockets[0].sent).toHaveLength(0);
  });
});

describe("optimistic state vs server truth", () => {
  it("flips immediately and stays once the server confirms", () => {
    const { client } = connectedClient();
    update(client, 0, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "public")]);
    client.store.optimisticToggle(1);
    expect(client.store.displayState(1)).toBe("private");
    // server confirms within two updates
    update(client, 1, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "private")]);
    expect(client.store.displayState(1)).toBe("private");
    update(client, 2, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "private")]);
    expect(client.store.displayState(1)).toBe("private");
  });

  it("reverts when the server never confirms within two updates", () => {
    const { client } = connectedClient();
    update(client, 0, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "public")]);
    client.store.optimisticToggle(1);
    expect(client.store.displayState(1)).toBe("private");
    update(client, 1, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "public")]);
    expect(client.store.displayState(1)).toBe("private"); // one grace update
    update(client, 2, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "public")]);
    expect(client.store.displayState(1)).toBe("public");  // reverted
  });
});

describe("reconnect", () => {
  it("derives everything from server messages after reconnecting", () => {
    const { client, sockets } = connectedClient();
    update(client, 0, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "private")]);
    expect(client.store.size).toBe(1);

    sockets[0].onclose?.();       // connection drops
    expect(client.store.size).toBe(0);
    expect(client.config).toBeNull();

    client.connect();             // new session
    sockets[1].onopen?.();
    client.handleMessage(JSON.stringify({
      type: "config", display_scale: 2, intrinsics: INTR,
    }));
    update(client, 0, [entry(1, [0, 0, 2], [0.4, 0.3, 0.1], "private")]);
    expect(client.store.displayState(1)).toBe("private");
  });
});
