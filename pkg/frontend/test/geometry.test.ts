import { describe, expect, it } from "vitest";

import {
  applyHomography,
  commonDestination,
  destinationAt,
  invert3x3,
  isSimplePolygon,
  snapToMm,
  validateZone,
} from "../src/geometry.js";
import type { Point } from "../src/types.js";

const SQUARE: Point[] = [
  [40, 40],
  [200, 40],
  [200, 200],
  [40, 200],
];

describe("snapToMm", () => {
  it("rounds to whole millimetres", () => {
    expect(snapToMm([12.4, 99.6])).toEqual([12, 100]);
  });
});

describe("destinationAt", () => {
  it("maps each square to its index", () => {
    expect(destinationAt([10, 10])).toBe(0);
    expect(destinationAt([290, 10])).toBe(1);
    expect(destinationAt([700, 270])).toBe(2);
    expect(destinationAt([1100, 100])).toBe(3);
  });

  it("rejects points outside the grid", () => {
    expect(destinationAt([10, -5])).toBeNull();
    expect(destinationAt([10, 300])).toBeNull();
    expect(destinationAt([-3, 10])).toBeNull();
    expect(destinationAt([1121, 10])).toBeNull();
  });
});

describe("isSimplePolygon", () => {
  it("accepts a square", () => {
    expect(isSimplePolygon(SQUARE)).toBe(true);
  });

  it("rejects a bow tie", () => {
    const bow: Point[] = [
      [40, 40],
      [200, 200],
      [200, 40],
      [40, 200],
    ];
    expect(isSimplePolygon(bow)).toBe(false);
  });

  it("rejects repeated consecutive vertices", () => {
    expect(
      isSimplePolygon([
        [0, 0],
        [0, 0],
        [10, 0],
        [10, 10],
      ]),
    ).toBe(false);
  });

  it("rejects fewer than three vertices", () => {
    expect(isSimplePolygon([[0, 0], [1, 1]] as Point[])).toBe(false);
  });
});

describe("validateZone (mirrors POST /dropzone)", () => {
  it("accepts a square inside destination 0", () => {
    expect(validateZone(0, SQUARE)).toBeNull();
  });

  it("accepts an L-shape inside destination 2", () => {
    const l: Point[] = [
      [600, 40],
      [800, 40],
      [800, 120],
      [700, 120],
      [700, 220],
      [600, 220],
    ];
    expect(validateZone(2, l)).toBeNull();
  });

  it("rejects straddling polygons", () => {
    const wide: Point[] = [
      [200, 40],
      [400, 40],
      [400, 200],
      [200, 200],
    ];
    expect(validateZone(0, wide)).toMatch(/leaves destination square/);
  });

  it("rejects self-intersection", () => {
    const bow: Point[] = [
      [40, 40],
      [200, 200],
      [200, 40],
      [40, 200],
    ];
    expect(validateZone(0, bow)).toMatch(/self-intersect/);
  });

  it("rejects bad destinations and short polygons", () => {
    expect(validateZone(5, SQUARE)).toMatch(/bad destination/);
    expect(validateZone(0, SQUARE.slice(0, 2))).toMatch(/3 vertices/);
  });
});

describe("commonDestination", () => {
  it("finds the shared square", () => {
    expect(commonDestination(SQUARE)).toBe(0);
  });

  it("is null when vertices straddle squares", () => {
    expect(
      commonDestination([
        [200, 40],
        [400, 40],
        [300, 200],
      ]),
    ).toBeNull();
  });

  it("is null for empty input", () => {
    expect(commonDestination([])).toBeNull();
  });
});

describe("homography helpers", () => {
  it("inverts the default camera transform", () => {
    const m = [
      [1, 0, 80],
      [0, 1, 80],
      [0, 0, 1],
    ];
    const inv = invert3x3(m);
    const world = applyHomography(inv, [640, 224]);
    expect(world[0]).toBeCloseTo(560, 9);
    expect(world[1]).toBeCloseTo(144, 9);
  });

  it("round-trips a projective matrix", () => {
    const m = [
      [1.01, 0.02, -3],
      [-0.015, 0.99, 2],
      [1e-5, -2e-5, 1],
    ];
    const inv = invert3x3(m);
    const p: Point = [123.4, 56.7];
    const back = applyHomography(inv, applyHomography(m, p));
    expect(back[0]).toBeCloseTo(p[0], 7);
    expect(back[1]).toBeCloseTo(p[1], 7);
  });

  it("throws on singular matrices", () => {
    expect(() =>
      invert3x3([
        [1, 2, 3],
        [2, 4, 6],
        [0, 0, 1],
      ]),
    ).toThrow(/singular/);
  });
});
