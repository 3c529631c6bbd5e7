/** Client-side box/grid math mirroring the engine's conventions. */

export interface Box {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export function clampBox(box: Box, width: number, height: number): Box | null {
  const x0 = Math.max(box.x0, 0);
  const y0 = Math.max(box.y0, 0);
  const x1 = Math.min(box.x1, width);
  const y1 = Math.min(box.y1, height);
  if (x0 >= x1 || y0 >= y1) return null;
  return { x0, y0, x1, y1 };
}

export function expandBox(box: Box, margin: number): Box {
  return { x0: box.x0 - margin, y0: box.y0 - margin, x1: box.x1 + margin, y1: box.y1 + margin };
}

/** The effective crop region of a step: clamp(expand(box, margin)). */
export function cropRegion(box: Box, margin: number, width: number, height: number): Box | null {
  return clampBox(expandBox(box, margin), width, height);
}

export interface GridCell {
  cell: number;
  x: number;
  y: number;
}

/** Centers of the 4x4 click grid over a crop region (row-major 0..15),
 * matching the engine: x = x0 + floor((2i+1)*w/8), y = y0 + floor((2j+1)*h/8). */
export function gridCellCenters(crop: Box): GridCell[] {
  const w = crop.x1 - crop.x0;
  const h = crop.y1 - crop.y0;
  const cells: GridCell[] = [];
  for (let cell = 0; cell < 16; cell++) {
    const i = cell % 4;
    const j = Math.floor(cell / 4);
    cells.push({
      cell,
      x: crop.x0 + Math.floor(((2 * i + 1) * w) / 8),
      y: crop.y0 + Math.floor(((2 * j + 1) * h) / 8),
    });
  }
  return cells;
}
