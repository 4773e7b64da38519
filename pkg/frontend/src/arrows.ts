// Aspect arrow overlay. One arrow per sampled cell, pointing along the
// aspect angle in world coordinates (x east, y north). Sampling defaults
// to a 10 m pitch: finer grids are thinned so the overlay stays readable.

import { GridPayload } from "./types.js";

export const DEFAULT_SPACING_METERS = 10;

export interface Arrow {
  x: number; // world coords of the cell center
  y: number;
  dx: number; // unit direction
  dy: number;
}

export function sampleStep(cellSize: number, spacingMeters: number = DEFAULT_SPACING_METERS): number {
  if (!(cellSize > 0)) throw new RangeError(`cell size must be positive, got ${cellSize}`);
  return Math.max(1, Math.round(spacingMeters / cellSize));
}

export function aspectArrows(
  grid: GridPayload,
  spacingMeters: number = DEFAULT_SPACING_METERS,
): Arrow[] {
  const { ncols, nrows, xllcorner, yllcorner, cell_size } = grid.meta;
  const step = sampleStep(cell_size, spacingMeters);
  const arrows: Arrow[] = [];
  for (let r = 0; r < nrows; r += step) {
    for (let c = 0; c < ncols; c += step) {
      const angle = grid.values[r][c];
      if (angle === null) continue; // flat or nodata cells carry no direction
      arrows.push({
        x: xllcorner + (c + 0.5) * cell_size,
        y: yllcorner + (r + 0.5) * cell_size,
        dx: Math.cos(angle),
        dy: Math.sin(angle),
      });
    }
  }
  return arrows;
}
