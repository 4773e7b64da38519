// Grid rasterization: values are quantized into equal-width histogram bins
// and each bin gets one gray level. 20 bins by default. Nodata cells come
// out fully transparent so the layer can stack over others.

import { GridPayload } from "./types.js";

export const DEFAULT_BINS = 20;

export interface Raster {
  width: number;
  height: number;
  // RGBA, row 0 at the top (north), ready for ImageData
  data: Uint8ClampedArray;
}

export function valueRange(values: (number | null)[][]): { min: number; max: number } | null {
  let min = Infinity;
  let max = -Infinity;
  for (const row of values) {
    for (const v of row) {
      if (v === null) continue;
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  return min <= max ? { min, max } : null;
}

// bin index for a value; the top edge closes the last bin
export function binIndex(v: number, min: number, max: number, bins: number): number {
  if (max === min) return 0;
  const i = Math.floor(((v - min) / (max - min)) * bins);
  return Math.min(Math.max(i, 0), bins - 1);
}

export function grayLevel(bin: number, bins: number): number {
  if (bins <= 1) return 128;
  return Math.round((bin * 255) / (bins - 1));
}

export function rasterize(grid: GridPayload, bins: number = DEFAULT_BINS): Raster {
  if (!Number.isInteger(bins) || bins < 1) {
    throw new RangeError(`bin count must be a positive integer, got ${bins}`);
  }
  const { ncols, nrows } = grid.meta;
  const data = new Uint8ClampedArray(ncols * nrows * 4);
  const range = valueRange(grid.values);
  for (let r = 0; r < nrows; r++) {
    const source = grid.values[r];
    const pixelRow = nrows - 1 - r; // grid rows run south to north, pixels top-down
    for (let c = 0; c < ncols; c++) {
      const v = source[c];
      const o = (pixelRow * ncols + c) * 4;
      if (v === null || range === null) {
        data[o + 3] = 0;
        continue;
      }
      const level = grayLevel(binIndex(v, range.min, range.max, bins), bins);
      data[o] = level;
      data[o + 1] = level;
      data[o + 2] = level;
      data[o + 3] = 255;
    }
  }
  return { width: ncols, height: nrows, data };
}

// distinct gray levels actually present, for legends and tests
export function usedLevels(raster: Raster): number[] {
  const seen = new Set<number>();
  for (let o = 0; o < raster.data.length; o += 4) {
    if (raster.data[o + 3] !== 0) seen.add(raster.data[o]);
  }
  return [...seen].sort((a, b) => a - b);
}
