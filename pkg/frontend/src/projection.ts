// Projects server-side 3-D boxes (viewer-world meters) into display pixels.
//
// The server reports centers in viewer-world space; this client knows the
// calibration pose it placed (camera-in-world), so world points pull back
// into the camera frame with the inverse rigid transform before the pinhole
// projection. Display coordinates are capture pixels times the display scale.

import type { Intrinsics, ObjectEntry } from "./protocol.js";

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

/** Row-major 9-element rotation + 3-element translation. */
export type FlatPose = number[];

export const IDENTITY_POSE: FlatPose = [1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0];

export function worldToCamera(pose: FlatPose, p: Vec3): Vec3 {
  const dx = p.x - pose[9];
  const dy = p.y - pose[10];
  const dz = p.z - pose[11];
  // transpose of the rotation
  return {
    x: pose[0] * dx + pose[3] * dy + pose[6] * dz,
    y: pose[1] * dx + pose[4] * dy + pose[7] * dz,
    z: pose[2] * dx + pose[5] * dy + pose[8] * dz,
  };
}

export interface ProjectedBox {
  id: number;
  label: string;
  state: "public" | "private";
  stale: boolean;
  /** Axis-aligned polygon (4 corners, display px), clockwise. */
  polygon: { x: number; y: number }[];
  /** Camera-frame depth of the box center, meters. */
  depth: number;
  /** True when every corner projects behind the camera. */
  offscreen: boolean;
}

const NEAR_PLANE = 1e-3;

export function projectBox(entry: ObjectEntry, calibration: FlatPose,
                           intr: Intrinsics, displayScale: number): ProjectedBox {
  const [cx, cy, cz] = entry.center;
  const [sx, sy, sz] = entry.size;
  const centerCam = worldToCamera(calibration, { x: cx, y: cy, z: cz });

  let minU = Infinity, maxU = -Infinity, minV = Infinity, maxV = -Infinity;
  let visible = 0;
  for (const dx of [-sx / 2, sx / 2]) {
    for (const dy of [-sy / 2, sy / 2]) {
      for (const dz of [-sz / 2, sz / 2]) {
        const c = worldToCamera(calibration,
                                { x: cx + dx, y: cy + dy, z: cz + dz });
        if (c.z < NEAR_PLANE) {
          continue;
        }
        visible += 1;
        const u = (intr.fx * c.x / c.z + intr.cx) * displayScale;
        const v = (intr.fy * c.y / c.z + intr.cy) * displayScale;
        minU = Math.min(minU, u);
        maxU = Math.max(maxU, u);
        minV = Math.min(minV, v);
        maxV = Math.max(maxV, v);
      }
    }
  }
  const offscreen = visible === 0;
  const polygon = offscreen ? [] : [
    { x: minU, y: minV },
    { x: maxU, y: minV },
    { x: maxU, y: maxV },
    { x: minU, y: maxV },
  ];
  return {
    id: entry.id,
    label: entry.class,
    state: entry.state,
    stale: entry.stale === true,
    polygon,
    depth: centerCam.z,
    offscreen,
  };
}
