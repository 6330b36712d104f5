import type { Point, Stroke } from "./types.js";

/**
 * Stamp a filled disc of the given class id onto the raster, clipped to the
 * canvas bounds. radius 1 paints the single pixel at the center.
 */
export function stampDisc(
  raster: Uint8Array,
  size: number,
  cx: number,
  cy: number,
  radius: number,
  classId: number,
): void {
  const r = Math.max(0, radius - 1);
  const x0 = Math.max(0, Math.ceil(cx - r));
  const x1 = Math.min(size - 1, Math.floor(cx + r));
  const y0 = Math.max(0, Math.ceil(cy - r));
  const y1 = Math.min(size - 1, Math.floor(cy + r));
  const r2 = r * r;
  for (let y = y0; y <= y1; y++) {
    const dy = y - cy;
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      if (dx * dx + dy * dy <= r2) {
        raster[y * size + x] = classId;
      }
    }
  }
}

/**
 * Rasterize a stroke as disc stamps along each segment, stepping at most one
 * pixel at a time so fast pointer moves leave no gaps.
 */
export function stampStroke(
  raster: Uint8Array,
  size: number,
  stroke: Stroke,
  radius: number,
  classId: number,
): void {
  const pts = stroke.points;
  if (pts.length === 0) return;
  let prev: Point = pts[0];
  stampDisc(raster, size, prev.x, prev.y, radius, classId);
  for (let i = 1; i < pts.length; i++) {
    const next = pts[i];
    const steps = Math.max(
      1,
      Math.ceil(Math.max(Math.abs(next.x - prev.x), Math.abs(next.y - prev.y))),
    );
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stampDisc(
        raster,
        size,
        prev.x + (next.x - prev.x) * t,
        prev.y + (next.y - prev.y) * t,
        radius,
        classId,
      );
    }
    prev = next;
  }
}
