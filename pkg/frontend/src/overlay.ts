// Box overlay rendering: opaque edges, near-transparent interiors so the
// content stays visible, green for public and red for private. Stale boxes
// and boxes occluded by a nearer box render dimmed. Off-screen projections
// are clipped by the canvas, never dropped from the list.

import type { ProjectedBox } from "./projection.js";

// Structural subset of CanvasRenderingContext2D so tests can stub it.
export interface OverlayContext {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
}

export const PUBLIC_COLOR = "#2ecc40";
export const PRIVATE_COLOR = "#ff4136";
const INTERIOR_ALPHA = 0.15; // interiors stay >= 80% transparent
const DIMMED_ALPHA = 0.35;

function rectOf(polygon: { x: number; y: number }[]) {
  const xs = polygon.map((p) => p.x);
  const ys = polygon.map((p) => p.y);
  return {
    x0: Math.min(...xs), x1: Math.max(...xs),
    y0: Math.min(...ys), y1: Math.max(...ys),
  };
}

function overlapFraction(a: ProjectedBox, b: ProjectedBox): number {
  if (a.polygon.length === 0 || b.polygon.length === 0) {
    return 0;
  }
  const ra = rectOf(a.polygon);
  const rb = rectOf(b.polygon);
  const w = Math.min(ra.x1, rb.x1) - Math.max(ra.x0, rb.x0);
  const h = Math.min(ra.y1, rb.y1) - Math.max(ra.y0, rb.y0);
  if (w <= 0 || h <= 0) {
    return 0;
  }
  const area = (ra.x1 - ra.x0) * (ra.y1 - ra.y0);
  return area > 0 ? (w * h) / area : 0;
}

/** A box is treated as occluded when a nearer box covers most of it. */
export function isOccluded(box: ProjectedBox, all: ProjectedBox[]): boolean {
  return all.some((other) => other.id !== box.id && other.depth < box.depth &&
    overlapFraction(box, other) > 0.5);
}

export function renderOverlay(ctx: OverlayContext, boxes: ProjectedBox[]): void {
  for (const box of boxes) {
    if (box.offscreen || box.polygon.length === 0) {
      continue;
    }
    const color = box.state === "private" ? PRIVATE_COLOR : PUBLIC_COLOR;
    const dimmed = box.stale || isOccluded(box, boxes);

    ctx.beginPath();
    ctx.moveTo(box.polygon[0].x, box.polygon[0].y);
    for (const p of box.polygon.slice(1)) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.closePath();

    ctx.globalAlpha = dimmed ? DIMMED_ALPHA * INTERIOR_ALPHA : INTERIOR_ALPHA;
    ctx.fillStyle = color;
    ctx.fill();

    ctx.globalAlpha = dimmed ? DIMMED_ALPHA : 1.0;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.stroke();
  }
  ctx.globalAlpha = 1.0;
}
