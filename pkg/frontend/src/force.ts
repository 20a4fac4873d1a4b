// Mapping canvas drags to force impulses in world coordinates.

import type { ForceRequest, GridInfo } from "./types.js";

export interface Drag {
  startX: number; // canvas pixels, origin top-left
  startY: number;
  endX: number;
  endY: number;
}

export function dragToForce(
  drag: Drag,
  grid: GridInfo,
  canvasWidth: number,
  canvasHeight: number,
  scale = 2.0,
): ForceRequest {
  if (grid.kind !== "grid" || !grid.nx || !grid.ny || !grid.h) {
    throw new Error("model has no grid; forcing unavailable");
  }
  const worldW = grid.nx * grid.h;
  const worldH = grid.ny * grid.h;
  // canvas y points down, world y points up
  const x = (drag.startX / canvasWidth) * worldW;
  const y = (1 - drag.startY / canvasHeight) * worldH;
  const dx = ((drag.endX - drag.startX) / canvasWidth) * worldW;
  const dy = (-(drag.endY - drag.startY) / canvasHeight) * worldH;
  const radius = Math.max(4 * grid.h, 0.5 * Math.hypot(dx, dy));
  return { x, y, dx, dy, radius, scale };
}
