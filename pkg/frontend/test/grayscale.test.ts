import { describe, expect, it } from "vitest";
import {
  binIndex,
  DEFAULT_BINS,
  grayLevel,
  rasterize,
  usedLevels,
  valueRange,
} from "../src/grayscale.js";
import { GridPayload } from "../src/types.js";

function grid(values: (number | null)[][]): GridPayload {
  return {
    id: "g",
    meta: {
      ncols: values[0].length,
      nrows: values.length,
      xllcorner: 0,
      yllcorner: 0,
      cell_size: 10,
      row_order: "south-to-north",
    },
    values,
  };
}

describe("rasterize", () => {
  it("uses 20 bins by default", () => {
    expect(DEFAULT_BINS).toBe(20);
    const values = [[...Array(40)].map((_, i) => i)];
    const raster = rasterize(grid(values));
    expect(usedLevels(raster)).toHaveLength(20);
  });

  it("renders a constant grid as one uniform tile", () => {
    const raster = rasterize(grid([[5, 5], [5, 5]]));
    expect(usedLevels(raster)).toHaveLength(1);
    // every pixel fully opaque and identical
    for (let i = 0; i < raster.data.length; i += 4) {
      expect(raster.data[i]).toBe(raster.data[0]);
      expect(raster.data[i + 3]).toBe(255);
    }
  });

  it("renders a two-valued grid with exactly two gray levels", () => {
    const raster = rasterize(grid([[1, 2, 1], [2, 1, 2]]));
    expect(usedLevels(raster)).toHaveLength(2);
  });

  it("maps nodata to transparent pixels", () => {
    const raster = rasterize(grid([[1, null], [3, 4]]));
    // grid row 0 is the southern row, so it lands on the bottom pixel row
    const bottomRow = 1;
    const alphaAt = (row: number, col: number) =>
      raster.data[(row * raster.width + col) * 4 + 3];
    expect(alphaAt(bottomRow, 1)).toBe(0);
    expect(alphaAt(bottomRow, 0)).toBe(255);
    expect(alphaAt(0, 0)).toBe(255);
  });

  it("flips rows so north ends up at the top", () => {
    // south row dark (low), north row light (high)
    const raster = rasterize(grid([[0, 0], [100, 100]]), 2);
    const topLevel = raster.data[0];
    const bottomLevel = raster.data[(1 * raster.width + 0) * 4];
    expect(topLevel).toBeGreaterThan(bottomLevel);
  });

  it("respects a user-chosen bin count", () => {
    const values = [[...Array(64)].map((_, i) => i)];
    expect(usedLevels(rasterize(grid(values), 4))).toHaveLength(4);
    expect(usedLevels(rasterize(grid(values), 8))).toHaveLength(8);
  });

  it("rejects non-positive or fractional bin counts", () => {
    const g = grid([[1, 2]]);
    expect(() => rasterize(g, 0)).toThrow(RangeError);
    expect(() => rasterize(g, -3)).toThrow(RangeError);
    expect(() => rasterize(g, 2.5)).toThrow(RangeError);
  });
});

describe("binIndex", () => {
  it("spreads the value range across bins and clamps the top edge", () => {
    expect(binIndex(0, 0, 10, 5)).toBe(0);
    expect(binIndex(10, 0, 10, 5)).toBe(4);
    expect(binIndex(5, 0, 10, 5)).toBe(2);
  });

  it("collapses to bin zero when the grid is constant", () => {
    expect(binIndex(7, 7, 7, 20)).toBe(0);
  });
});

describe("grayLevel", () => {
  it("spans 0..255 across the bin range", () => {
    expect(grayLevel(0, 20)).toBe(0);
    expect(grayLevel(19, 20)).toBe(255);
  });
});

describe("valueRange", () => {
  it("ignores nulls", () => {
    expect(valueRange([[null, 3], [1, null]])).toEqual({ min: 1, max: 3 });
  });

  it("returns null for an all-nodata grid", () => {
    expect(valueRange([[null], [null]])).toBeNull();
  });
});
