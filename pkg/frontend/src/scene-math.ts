/** Pure helpers behind the canvas: world/screen transforms, hit testing,
 * and the 1 cm drop snap. Kept DOM-free so they are unit-testable. */

import type { Box, Entity, Region } from "./types.js";

export interface Viewport {
  /** world meters covered by the canvas */
  worldW: number;
  worldH: number;
  /** canvas pixels */
  pxW: number;
  pxH: number;
  margin: number;
}

export function scaleOf(vp: Viewport): number {
  return Math.min(
    (vp.pxW - 2 * vp.margin) / vp.worldW,
    (vp.pxH - 2 * vp.margin) / vp.worldH,
  );
}

export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  const s = scaleOf(vp);
  // y flips: world y grows away from the viewer, screen y grows downward
  return [vp.margin + x * s, vp.pxH - vp.margin - y * s];
}

export function screenToWorld(vp: Viewport, px: number, py: number): [number, number] {
  const s = scaleOf(vp);
  return [(px - vp.margin) / s, (vp.pxH - vp.margin - py) / s];
}

/** Drop positions snap to the 1 cm grid. */
export function snapToGrid(v: number, grid = 0.01): number {
  return Math.round(v / grid) / (1 / grid);
}

export function footprint(box: Box): { x: number; y: number; w: number; h: number } {
  return {
    x: box.min[0],
    y: box.min[1],
    w: box.max[0] - box.min[0],
    h: box.max[1] - box.min[1],
  };
}

/** Topmost entity whose footprint contains the world point; objects win
 * over persons so small things on tables stay draggable. */
export function hitTest(entities: Entity[], wx: number, wy: number): Entity | null {
  const inside = (e: Entity) =>
    wx >= e.bbox.min[0] && wx <= e.bbox.max[0] && wy >= e.bbox.min[1] && wy <= e.bbox.max[1];
  const candidates = entities.filter((e) => e.state !== "lost" && inside(e));
  if (candidates.length === 0) return null;
  candidates.sort((a, b) => {
    if (a.kind !== b.kind) return a.kind === "object" ? -1 : 1;
    const area = (e: Entity) =>
      (e.bbox.max[0] - e.bbox.min[0]) * (e.bbox.max[1] - e.bbox.min[1]);
    return area(a) - area(b); // smaller on top
  });
  return candidates[0];
}

/** Where a dragged entity's bottom-center lands, snapped, kept in bounds. */
export function dropPosition(
  entity: Entity,
  wx: number,
  wy: number,
  bounds: Region | null,
): [number, number, number] {
  let x = snapToGrid(wx);
  let y = snapToGrid(wy);
  if (bounds) {
    x = Math.min(Math.max(x, bounds.box.min[0]), bounds.box.max[0]);
    y = Math.min(Math.max(y, bounds.box.min[1]), bounds.box.max[1]);
  }
  return [x, y, entity.bbox.min[2]];
}

export const EDGE_COLORS: Record<string, string> = {
  in: "#9c27b0",
  on: "#e65100",
  near: "#90a4ae",
  next_to: "#1976d2",
  in_location: "#78909c",
};
