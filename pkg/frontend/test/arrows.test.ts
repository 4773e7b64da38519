import { describe, expect, it } from "vitest";
import { aspectArrows, DEFAULT_SPACING_METERS, sampleStep } from "../src/arrows.js";
import { GridPayload } from "../src/types.js";
import aspectFixture from "./fixture/aspect_grid.json";

describe("sampleStep", () => {
  it("keeps one arrow per cell at 10 m cells", () => {
    expect(DEFAULT_SPACING_METERS).toBe(10);
    expect(sampleStep(10)).toBe(1);
  });

  it("thins finer grids to the 10 m pitch", () => {
    expect(sampleStep(5)).toBe(2);
    expect(sampleStep(2)).toBe(5);
    expect(sampleStep(1)).toBe(10);
  });

  it("never skips to zero on coarse grids", () => {
    expect(sampleStep(30)).toBe(1);
    expect(sampleStep(1000)).toBe(1);
  });

  it("rejects non-positive cell sizes", () => {
    expect(() => sampleStep(0)).toThrow(RangeError);
    expect(() => sampleStep(-10)).toThrow(RangeError);
  });
});

describe("aspectArrows", () => {
  const fixture = aspectFixture as GridPayload;

  it("yields one unit arrow per cell on the service fixture", () => {
    const arrows = aspectArrows(fixture);
    expect(arrows).toHaveLength(fixture.meta.ncols * fixture.meta.nrows);
    for (const a of arrows) {
      expect(Math.hypot(a.dx, a.dy)).toBeCloseTo(1, 12);
    }
  });

  it("places arrows at cell centers in world coordinates", () => {
    const arrows = aspectArrows(fixture);
    const { xllcorner, yllcorner, cell_size } = fixture.meta;
    expect(arrows[0].x).toBe(xllcorner + 0.5 * cell_size);
    expect(arrows[0].y).toBe(yllcorner + 0.5 * cell_size);
    const last = arrows[arrows.length - 1];
    expect(last.x).toBe(xllcorner + (fixture.meta.ncols - 0.5) * cell_size);
    expect(last.y).toBe(yllcorner + (fixture.meta.nrows - 0.5) * cell_size);
  });

  it("points along the aspect angle", () => {
    const east: GridPayload = {
      id: "a",
      meta: {
        ncols: 1,
        nrows: 1,
        xllcorner: 0,
        yllcorner: 0,
        cell_size: 10,
        row_order: "south-to-north",
      },
      values: [[0]],
    };
    const [arrow] = aspectArrows(east);
    expect(arrow.dx).toBeCloseTo(1, 12);
    expect(arrow.dy).toBeCloseTo(0, 12);

    east.values = [[Math.PI / 2]];
    const [north] = aspectArrows(east);
    expect(north.dx).toBeCloseTo(0, 12);
    expect(north.dy).toBeCloseTo(1, 12);
  });

  it("skips flat and nodata cells", () => {
    const g: GridPayload = {
      id: "a",
      meta: {
        ncols: 2,
        nrows: 1,
        xllcorner: 0,
        yllcorner: 0,
        cell_size: 10,
        row_order: "south-to-north",
      },
      values: [[null, 1.2]],
    };
    const arrows = aspectArrows(g);
    expect(arrows).toHaveLength(1);
    expect(arrows[0].x).toBe(15);
  });

  it("samples every other cell when the grid is twice as fine as the pitch", () => {
    const values = [...Array(4)].map(() => [...Array(4)].map(() => 0.5));
    const g: GridPayload = {
      id: "a",
      meta: {
        ncols: 4,
        nrows: 4,
        xllcorner: 0,
        yllcorner: 0,
        cell_size: 5,
        row_order: "south-to-north",
      },
      values,
    };
    const arrows = aspectArrows(g);
    expect(arrows).toHaveLength(4); // rows 0,2 × cols 0,2
    expect(arrows.map((a) => a.x)).toEqual([2.5, 12.5, 2.5, 12.5]);
  });
});
