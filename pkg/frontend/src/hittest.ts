// Click hit-testing against projected boxes: the topmost (nearest center
// depth) box under the pointer wins; empty space yields no hit.

import type { ProjectedBox } from "./projection.js";

export function pointInPolygon(x: number, y: number,
                               polygon: { x: number; y: number }[]): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const a = polygon[i];
    const b = polygon[j];
    const crosses = (a.y > y) !== (b.y > y) &&
      x < ((b.x - a.x) * (y - a.y)) / (b.y - a.y) + a.x;
    if (crosses) {
      inside = !inside;
    }
  }
  return inside;
}

export function hitTest(x: number, y: number,
                        boxes: ProjectedBox[]): ProjectedBox | null {
  let best: ProjectedBox | null = null;
  for (const box of boxes) {
    if (box.offscreen || !pointInPolygon(x, y, box.polygon)) {
      continue;
    }
    if (best === null || box.depth < best.depth) {
      best = box;
    }
  }
  return best;
}
