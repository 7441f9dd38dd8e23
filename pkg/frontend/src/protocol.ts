// Wire messages shared with the processing server.
// Text frames carry JSON; binary frames carry an 8-byte little-endian
// frame id followed by JPEG bytes.

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface ConfigMsg {
  type: "config";
  intrinsics: Intrinsics;
  display_scale: number;
}

export type PrivacyState = "public" | "private";

export interface ObjectEntry {
  id: number;
  class: string;
  state: PrivacyState;
  center: [number, number, number];
  size: [number, number, number];
  stale?: boolean;
}

export interface ObjectsMsg {
  type: "objects";
  frame_id: number;
  objects: ObjectEntry[];
}

export interface ErrorMsg {
  type: "error";
  reason: string;
}

export type ServerMsg = ConfigMsg | ObjectsMsg | ErrorMsg;

export function parseServerMessage(text: string): ServerMsg {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new Error("server sent invalid JSON");
  }
  if (typeof doc !== "object" || doc === null || !("type" in doc)) {
    throw new Error("server message missing type");
  }
  const typed = doc as { type: string };
  if (typed.type === "config" || typed.type === "objects" || typed.type === "error") {
    return doc as ServerMsg;
  }
  throw new Error(`unknown server message type ${typed.type}`);
}

export interface DecodedFrame {
  frameId: number;
  jpeg: Uint8Array;
}

export function decodeFrameMessage(data: ArrayBuffer): DecodedFrame {
  if (data.byteLength < 8) {
    throw new Error("frame message shorter than its id prefix");
  }
  const view = new DataView(data);
  // 53-bit number space is ample for a frame counter.
  const lo = view.getUint32(0, true);
  const hi = view.getUint32(4, true);
  return { frameId: hi * 2 ** 32 + lo, jpeg: new Uint8Array(data, 8) };
}

export function toggleMessage(id: number): string {
  return JSON.stringify({ type: "toggle", id });
}

export function calibrationMessage(pose: number[]): string {
  if (pose.length !== 12) {
    throw new Error("calibration pose needs 12 values");
  }
  return JSON.stringify({ type: "calibration", pose });
}

export function confirmMessage(): string {
  return JSON.stringify({ type: "confirm" });
}
