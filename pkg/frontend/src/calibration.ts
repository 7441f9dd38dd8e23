// Slider-driven calibration: the operator nudges the virtual camera pose
// (translation + yaw/pitch/roll) until the boxes line up, then confirms.
// Confirm stays disabled until the pose was edited at least once or the
// defaults are accepted explicitly.

import type { FlatPose } from "./projection.js";

export interface CalibrationValues {
  tx: number;
  ty: number;
  tz: number;
  yawDeg: number;
  pitchDeg: number;
  rollDeg: number;
}

export const DEFAULT_VALUES: CalibrationValues = {
  tx: 0, ty: 0, tz: 0, yawDeg: 0, pitchDeg: 0, rollDeg: 0,
};

/** Yaw about y, then pitch about x, then roll about z; row-major flat pose. */
export function poseFromValues(v: CalibrationValues): FlatPose {
  const a = (v.yawDeg * Math.PI) / 180;
  const b = (v.pitchDeg * Math.PI) / 180;
  const c = (v.rollDeg * Math.PI) / 180;
  const ry = [
    [Math.cos(a), 0, Math.sin(a)],
    [0, 1, 0],
    [-Math.sin(a), 0, Math.cos(a)],
  ];
  const rx = [
    [1, 0, 0],
    [0, Math.cos(b), -Math.sin(b)],
    [0, Math.sin(b), Math.cos(b)],
  ];
  const rz = [
    [Math.cos(c), -Math.sin(c), 0],
    [Math.sin(c), Math.cos(c), 0],
    [0, 0, 1],
  ];
  const mul = (m: number[][], n: number[][]) =>
    m.map((row, i) => n[0].map((_, j) =>
      row[0] * n[0][j] + row[1] * n[1][j] + row[2] * n[2][j]));
  const r = mul(mul(ry, rx), rz);
  return [...r[0], ...r[1], ...r[2], v.tx, v.ty, v.tz];
}

export class CalibrationWidget {
  values: CalibrationValues = { ...DEFAULT_VALUES };
  private edited = false;
  private defaultsAccepted = false;
  confirmed = false;

  setValue(key: keyof CalibrationValues, value: number): void {
    this.values[key] = value;
    this.edited = true;
    this.confirmed = false;
  }

  acceptDefaults(): void {
    this.defaultsAccepted = true;
  }

  canConfirm(): boolean {
    return this.edited || this.defaultsAccepted;
  }

  confirm(): FlatPose {
    if (!this.canConfirm()) {
      throw new Error("calibration must be edited or defaults accepted first");
    }
    this.confirmed = true;
    return poseFromValues(this.values);
  }
}
