"""Projective rectification, polygon processing, and the drop-point solver.

Polygons are (n, 2) float arrays of vertices, implicitly closed, oriented
counterclockwise (positive shoelace area).  Pixel polygons use image
coordinates (x right, y down); the orientation convention is purely
algebraic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from agvlab import kernels


class DegenerateGeometryError(ValueError):
    pass


class MaskExtractionError(ValueError):
    def __init__(self, component_count: int):
        self.component_count = component_count
        super().__init__(f"expected exactly 1 drop-area component, found {component_count}")


@dataclass(frozen=True)
class DropPoint:
    """Pole of inaccessibility: position plus inscribed-circle radius."""

    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so h[2][2] == 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise DegenerateGeometryError(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) < 1e-12:
            raise DegenerateGeometryError("homography h22 ~ 0")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-9:
            raise DegenerateGeometryError("homography is singular")
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        hom = (self.matrix @ np.hstack([pts, ones]).T).T
        return hom[:, :2] / hom[:, 2:3]


def _any_three_collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                a, b, c = pts[i], pts[j], pts[k]
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                scale = max(np.abs(pts).max(), 1.0)
                if abs(cross) <= tol * scale * scale:
                    return True
    return False


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Exact 4-correspondence DLT solve (8 unknowns, h22 fixed to 1)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise DegenerateGeometryError("need exactly 4 source and 4 destination points")
    if _any_three_collinear(src) or _any_three_collinear(dst):
        raise DegenerateGeometryError("three of the four points are collinear")
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError(f"degenerate correspondence set: {exc}") from exc
    return Homography(np.append(h, 1.0).reshape(3, 3))


def warp_image(img: np.ndarray, h: Homography, out_w: int, out_h: int,
               fill: int = 255) -> np.ndarray:
    """Inverse-mapped bilinear warp; samples outside the source become fill."""
    hinv = np.ascontiguousarray(h.inverse().matrix)
    # the compiled kernel takes a non-const memoryview, so read-only inputs
    # (e.g. arrays wrapping decoder buffers) must be copied first
    src = np.require(img, dtype=np.uint8, requirements=["C", "W"])
    return kernels.warp_bilinear(src, hinv, int(out_w), int(out_h), int(fill))


# --- polygon primitives -----------------------------------------------------


def signed_area(poly: np.ndarray) -> float:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    p = np.asarray(poly, dtype=np.float64)
    return p if signed_area(p) >= 0 else p[::-1].copy()


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-12:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def is_simple_polygon(poly: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect (O(n^2) check)."""
    p = np.asarray(poly, dtype=np.float64)
    n = len(p)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = p[i], p[(i + 1) % n]
        if np.allclose(a1, a2):
            return False
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, p[j], p[(j + 1) % n]):
                return False
    return True


def point_in_polygon(p, poly: np.ndarray) -> bool:
    """Even-odd ray casting."""
    x, y = float(p[0]), float(p[1])
    v = np.asarray(poly, dtype=np.float64)
    n = len(v)
    inside = False
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xcross:
                inside = not inside
    return inside


def _point_segment_distance(px, py, x1, y1, x2, y2) -> float:
    dx, dy = x2 - x1, y2 - y1
    if dx == 0 and dy == 0:
        return math.hypot(px - x1, py - y1)
    t = ((px - x1) * dx + (py - y1) * dy) / (dx * dx + dy * dy)
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


def point_polygon_distance(p, poly: np.ndarray) -> float:
    """Signed distance: positive inside, negative outside, 0 on the boundary."""
    x, y = float(p[0]), float(p[1])
    v = np.asarray(poly, dtype=np.float64)
    n = len(v)
    d = min(
        _point_segment_distance(x, y, v[i][0], v[i][1], v[(i + 1) % n][0], v[(i + 1) % n][1])
        for i in range(n)
    )
    return d if point_in_polygon((x, y), v) else -d


# --- polylabel (pole of inaccessibility) ------------------------------------


class _Cell:
    __slots__ = ("x", "y", "h", "d", "max")

    def __init__(self, x, y, h, poly):
        self.x = x
        self.y = y
        self.h = h
        self.d = point_polygon_distance((x, y), poly)
        self.max = self.d + h * math.sqrt(2)


def polylabel(poly: np.ndarray, precision: float = 1.0) -> DropPoint:
    """Quadtree search for the interior point farthest from every edge.

    Cells are explored best-first by their maximum potential distance and
    pruned once they cannot beat the incumbent by more than ``precision``.
    """
    if precision <= 0:
        raise ValueError("precision must be positive")
    p = np.asarray(poly, dtype=np.float64)
    if len(p) < 3 or abs(signed_area(p)) < 1e-12:
        raise DegenerateGeometryError("polygon has (near) zero area")

    min_x, min_y = p.min(axis=0)
    max_x, max_y = p.max(axis=0)
    cell_size = min(max_x - min_x, max_y - min_y)
    if cell_size == 0:
        raise DegenerateGeometryError("degenerate polygon bounding box")
    h = cell_size / 2.0

    queue: list[tuple[float, int, _Cell]] = []
    counter = 0

    def push(cell: _Cell):
        nonlocal counter
        heapq.heappush(queue, (-cell.max, counter, cell))
        counter += 1

    x = min_x
    while x < max_x:
        y = min_y
        while y < max_y:
            push(_Cell(x + h, y + h, h, p))
            y += cell_size
        x += cell_size

    # seed with the centroid and the bbox centre
    cx, cy = p.mean(axis=0)
    best = _Cell(cx, cy, 0, p)
    bbox = _Cell((min_x + max_x) / 2, (min_y + max_y) / 2, 0, p)
    if bbox.d > best.d:
        best = bbox

    while queue:
        _, _, cell = heapq.heappop(queue)
        if cell.d > best.d:
            best = cell
        if cell.max - best.d <= precision:
            continue
        h = cell.h / 2
        push(_Cell(cell.x - h, cell.y - h, h, p))
        push(_Cell(cell.x + h, cell.y - h, h, p))
        push(_Cell(cell.x - h, cell.y + h, h, p))
        push(_Cell(cell.x + h, cell.y + h, h, p))

    return DropPoint(best.x, best.y, best.d)


# --- mask -> polygon ---------------------------------------------------------

_MOORE = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]


def _trace_boundary(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour boundary trace (clockwise scan) of a single component.

    Returns boundary pixel centres as (x, y), starting at the top-left-most
    foreground pixel.  Uses Jacob's stopping criterion.
    """
    ys, xs = np.nonzero(mask)
    start_idx = np.lexsort((xs, ys))[0]
    start = (int(xs[start_idx]), int(ys[start_idx]))

    h, w = mask.shape

    def fg(x, y):
        return 0 <= x < w and 0 <= y < h and mask[y, x]

    if not any(fg(start[0] + dx, start[1] + dy) for dx, dy in _MOORE):
        return [start]

    boundary: list[tuple[int, int]] = []
    cur = start
    prev = (start[0] - 1, start[1])  # west of the top-left pixel is background
    start_state = None
    for _ in range(8 * mask.size):
        # scan the Moore ring clockwise starting just after the backtrack pixel
        sdir = _MOORE.index((prev[0] - cur[0], prev[1] - cur[1]))
        nxt = None
        for k in range(1, 9):
            dx, dy = _MOORE[(sdir + k) % 8]
            cand = (cur[0] + dx, cur[1] + dy)
            if fg(*cand):
                nxt = cand
                break
            prev = cand
        assert nxt is not None
        state = (cur, nxt)
        if state == start_state:
            return boundary
        if start_state is None:
            start_state = state
        boundary.append(cur)
        cur = nxt  # prev already holds the last background pixel scanned
    raise MaskExtractionError(1)  # trace runaway; treat as malformed


def _dp_simplify_chain(pts: np.ndarray, eps: float) -> list[int]:
    """Douglas-Peucker on an open chain; returns kept indices (incl. ends)."""
    keep = [0, len(pts) - 1]
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = pts[j] - pts[i]
        norm = np.hypot(*seg)
        best_d, best_k = -1.0, -1
        for k in range(i + 1, j):
            if norm == 0:
                d = np.hypot(*(pts[k] - pts[i]))
            else:
                d = abs(seg[0] * (pts[k][1] - pts[i][1]) - seg[1] * (pts[k][0] - pts[i][0])) / norm
            if d > best_d:
                best_d, best_k = d, k
        if best_d > eps:
            keep.append(best_k)
            stack.append((i, best_k))
            stack.append((best_k, j))
    return sorted(set(keep))


def simplify_closed(pts: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker for a closed ring, split at two mutually-far anchors."""
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) <= 4:
        return pts
    # anchor 0 and the vertex farthest from it survive any simplification
    d = np.hypot(pts[:, 0] - pts[0, 0], pts[:, 1] - pts[0, 1])
    far = int(np.argmax(d))
    chain1 = pts[: far + 1]
    chain2 = np.vstack([pts[far:], pts[:1]])
    k1 = _dp_simplify_chain(chain1, eps)
    k2 = _dp_simplify_chain(chain2, eps)
    out = [chain1[i] for i in k1[:-1]] + [chain2[i] for i in k2[:-1]]
    return np.asarray(out)


def polygon_from_mask(mask: np.ndarray, epsilon: float = 2.0) -> np.ndarray:
    """Trace and simplify the boundary of the single foreground component.

    Components smaller than 25 px are treated as noise; exactly one
    significant component must remain or MaskExtractionError is raised with
    the observed count.  Output is counterclockwise (positive shoelace area).
    """
    mask = np.asarray(mask).astype(bool)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])  # 4-connectivity
    labels, n = ndimage.label(mask, structure=structure)
    if n == 0:
        raise MaskExtractionError(0)
    areas = ndimage.sum_labels(mask, labels, index=range(1, n + 1))
    significant = [i + 1 for i, a in enumerate(areas) if a >= 25]
    if len(significant) != 1:
        raise MaskExtractionError(len(significant))
    component = labels == significant[0]
    boundary = np.asarray(_trace_boundary(component), dtype=np.float64)
    poly = simplify_closed(boundary, epsilon)
    if len(poly) < 3:
        raise MaskExtractionError(0)
    return ensure_ccw(poly)


# --- px -> world -------------------------------------------------------------

DESTINATION_SIZE_MM = 280.0


def px_to_world(p, dest: int, scale: float = 1.0) -> tuple[float, float]:
    """Map a point in a canonical 280x280 destination tile to world mm.

    The canonical tile is rendered at 1 px = 1 mm; destination k occupies
    x in [k*280, (k+1)*280], y in [0, 280] in the marker-grid world frame.
    """
    if dest not in (0, 1, 2, 3):
        raise ValueError(f"destination must be 0-3, got {dest}")
    x, y = float(p[0]), float(p[1])
    if not (0 <= x * scale <= DESTINATION_SIZE_MM and 0 <= y * scale <= DESTINATION_SIZE_MM):
        raise ValueError(f"point ({x}, {y}) outside the canonical destination tile")
    return (dest * DESTINATION_SIZE_MM + x * scale, y * scale)
