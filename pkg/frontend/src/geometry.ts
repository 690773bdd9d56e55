/** Client-side zone validation mirroring the server's POST /dropzone rules.
 *
 * The console never computes the drop point itself; this module only keeps
 * obviously-invalid sketches from reaching the server and maps canvas
 * clicks to world millimetres.
 */

import type { Point } from "./types.js";

export const SQUARE_MM = 280;
export const DESTINATIONS = 4;

export function snapToMm(p: Point): Point {
  return [Math.round(p[0]), Math.round(p[1])];
}

/** Which destination square contains the point, or null. */
export function destinationAt(p: Point): number | null {
  const [x, y] = p;
  if (y < 0 || y > SQUARE_MM) return null;
  const k = Math.floor(x / SQUARE_MM);
  if (k < 0 || k >= DESTINATIONS) return null;
  if (x < k * SQUARE_MM || x > (k + 1) * SQUARE_MM) return null;
  return k;
}

function orient(a: Point, b: Point, c: Point): number {
  const v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  if (Math.abs(v) < 1e-12) return 0;
  return v > 0 ? 1 : -1;
}

function onSegment(a: Point, b: Point, c: Point): boolean {
  return (
    Math.min(a[0], b[0]) - 1e-12 <= c[0] &&
    c[0] <= Math.max(a[0], b[0]) + 1e-12 &&
    Math.min(a[1], b[1]) - 1e-12 <= c[1] &&
    c[1] <= Math.max(a[1], b[1]) + 1e-12
  );
}

function segmentsIntersect(p1: Point, p2: Point, p3: Point, p4: Point): boolean {
  const o1 = orient(p1, p2, p3);
  const o2 = orient(p1, p2, p4);
  const o3 = orient(p3, p4, p1);
  const o4 = orient(p3, p4, p2);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(p1, p2, p3)) return true;
  if (o2 === 0 && onSegment(p1, p2, p4)) return true;
  if (o3 === 0 && onSegment(p3, p4, p1)) return true;
  if (o4 === 0 && onSegment(p3, p4, p2)) return true;
  return false;
}

export function isSimplePolygon(poly: Point[]): boolean {
  const n = poly.length;
  if (n < 3) return false;
  for (let i = 0; i < n; i++) {
    const a1 = poly[i];
    const a2 = poly[(i + 1) % n];
    if (Math.abs(a1[0] - a2[0]) < 1e-9 && Math.abs(a1[1] - a2[1]) < 1e-9) {
      return false;
    }
    for (let j = i + 1; j < n; j++) {
      if (j === i || (j + 1) % n === i || (i + 1) % n === j) continue;
      if (segmentsIntersect(a1, a2, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

/** Validation verdict matching the server: null means acceptable. */
export function validateZone(destination: number, polygon: Point[]): string | null {
  if (!Number.isInteger(destination) || destination < 0 || destination >= DESTINATIONS) {
    return `bad destination ${destination}`;
  }
  if (polygon.length < 3) return "need at least 3 vertices";
  if (!isSimplePolygon(polygon)) return "polygon must not self-intersect";
  const x0 = destination * SQUARE_MM;
  const x1 = (destination + 1) * SQUARE_MM;
  for (const [x, y] of polygon) {
    if (x < x0 || x > x1 || y < 0 || y > SQUARE_MM) {
      return `polygon leaves destination square ${destination}`;
    }
  }
  return null;
}

/** Destination shared by all vertices, or null if they straddle squares. */
export function commonDestination(polygon: Point[]): number | null {
  if (polygon.length === 0) return null;
  const first = destinationAt(polygon[0]);
  if (first === null) return null;
  for (const p of polygon) {
    if (destinationAt(p) !== first) return null;
  }
  return first;
}

/** Invert a 3x3 homography matrix (row-major nested arrays). */
export function invert3x3(m: number[][]): number[][] {
  const [a, b, c] = m[0];
  const [d, e, f] = m[1];
  const [g, h, i] = m[2];
  const A = e * i - f * h;
  const B = c * h - b * i;
  const C = b * f - c * e;
  const D = f * g - d * i;
  const E = a * i - c * g;
  const F = c * d - a * f;
  const G = d * h - e * g;
  const H = b * g - a * h;
  const I = a * e - b * d;
  const det = a * A + b * D + c * G;
  if (!Number.isFinite(det) || Math.abs(det) < 1e-12) {
    throw new Error("camera matrix is singular");
  }
  return [
    [A / det, B / det, C / det],
    [D / det, E / det, F / det],
    [G / det, H / det, I / det],
  ];
}

export function applyHomography(m: number[][], p: Point): Point {
  const w = m[2][0] * p[0] + m[2][1] * p[1] + m[2][2];
  return [
    (m[0][0] * p[0] + m[0][1] * p[1] + m[0][2]) / w,
    (m[1][0] * p[0] + m[1][1] * p[1] + m[1][2]) / w,
  ];
}
