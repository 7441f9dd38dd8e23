// Connection controller: owns the socket, the object store, and the
// click-to-toggle flow. The socket factory is injected so tests can drive
// the controller with a fake.

import { hitTest } from "./hittest.js";
import type { ProjectedBox } from "./projection.js";
import {
  ConfigMsg,
  DecodedFrame,
  ObjectsMsg,
  decodeFrameMessage,
  parseServerMessage,
  toggleMessage,
} from "./protocol.js";
import { ObjectStore } from "./state.js";

// Structural subset of WebSocket; handler params typed loosely so both real
// sockets and test fakes fit.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  binaryType: string;
  onopen: ((ev: any) => any) | null;
  onmessage: ((ev: any) => any) | null;
  onclose: ((ev: any) => any) | null;
}

export interface ClientEvents {
  onFrame?(frame: DecodedFrame): void;
  onObjects?(msg: ObjectsMsg): void;
  onConfig?(msg: ConfigMsg): void;
  onStatus?(text: string): void;
}

export class OperatorClient {
  readonly store = new ObjectStore();
  config: ConfigMsg | null = null;
  connected = false;
  private socket: SocketLike | null = null;
  private closedByUs = false;

  constructor(private makeSocket: () => SocketLike,
              private events: ClientEvents = {},
              private reconnectDelayMs = 1000) {}

  connect(): void {
    this.closedByUs = false;
    const socket = this.makeSocket();
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.connected = true;
      this.events.onStatus?.("connected");
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onclose = () => {
      this.connected = false;
      // no client-side persistence: everything re-derives from the server
      this.store.reset();
      this.config = null;
      this.events.onStatus?.("disconnected");
      if (!this.closedByUs && this.reconnectDelayMs > 0) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    this.socket = socket;
  }

  handleMessage(data: unknown): void {
    if (typeof data === "string") {
      const msg = parseServerMessage(data);
      if (msg.type === "config") {
        this.config = msg;
        this.events.onConfig?.(msg);
      } else if (msg.type === "objects") {
        this.store.applyUpdate(msg);
        this.events.onObjects?.(msg);
      } else {
        this.events.onStatus?.(`server error: ${msg.reason}`);
      }
    } else if (data instanceof ArrayBuffer) {
      this.events.onFrame?.(decodeFrameMessage(data));
    }
  }

  send(text: string): void {
    if (!this.socket || !this.connected) {
      throw new Error("not connected");
    }
    this.socket.send(text);
  }

  /**
   * Hit-test a click against the projected boxes; the nearest box under the
   * pointer gets exactly one toggle message (optimistically flipped locally,
   * reverted if the server never confirms). Returns the toggled id or null.
   */
  clickAt(x: number, y: number, boxes: ProjectedBox[]): number | null {
    const hit = hitTest(x, y, boxes);
    if (hit === null) {
      return null;
    }
    this.send(toggleMessage(hit.id));
    this.store.optimisticToggle(hit.id);
    return hit.id;
  }

  close(): void {
    this.closedByUs = true;
    this.socket?.close();
  }
}
