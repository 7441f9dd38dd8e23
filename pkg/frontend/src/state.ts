// Client-side object state: a pure function of the last server update plus
// pending optimistic toggles. Nothing is persisted across reconnects — a
// fresh connection rebuilds everything from server messages alone.

import type { ObjectEntry, ObjectsMsg, PrivacyState } from "./protocol.js";

interface PendingToggle {
  target: PrivacyState;
  updatesLeft: number;
}

/** How many server updates an optimistic flip survives before reverting. */
const OPTIMISM_WINDOW = 2;

export class ObjectStore {
  private objects = new Map<number, ObjectEntry>();
  private pending = new Map<number, PendingToggle>();
  lastFrameId = -1;

  applyUpdate(msg: ObjectsMsg): void {
    this.objects = new Map(msg.objects.map((o) => [o.id, o]));
    this.lastFrameId = msg.frame_id;
    for (const [id, p] of [...this.pending]) {
      const server = this.objects.get(id);
      if (!server || server.state === p.target) {
        this.pending.delete(id); // confirmed (or track died)
        continue;
      }
      p.updatesLeft -= 1;
      if (p.updatesLeft <= 0) {
        this.pending.delete(id); // revert: server never confirmed
      }
    }
  }

  /** Register an optimistic flip for a toggle that was just sent. */
  optimisticToggle(id: number): void {
    const server = this.objects.get(id);
    if (!server) {
      return;
    }
    const current = this.displayState(id) ?? server.state;
    const target: PrivacyState = current === "public" ? "private" : "public";
    this.pending.set(id, { target, updatesLeft: OPTIMISM_WINDOW });
  }

  /** State to render: server truth overlaid with pending optimism. */
  displayState(id: number): PrivacyState | undefined {
    const server = this.objects.get(id);
    if (!server) {
      return undefined;
    }
    return this.pending.get(id)?.target ?? server.state;
  }

  entries(): ObjectEntry[] {
    return [...this.objects.values()].map((o) => ({
      ...o,
      state: this.displayState(o.id) ?? o.state,
    }));
  }

  /** Drop everything; used when the socket closes. */
  reset(): void {
    this.objects.clear();
    this.pending.clear();
    this.lastFrameId = -1;
  }

  get size(): number {
    return this.objects.size;
  }
}
