"""Edge intelligence pipeline: marker detection, destination isolation,
drop-zone extraction, delivery computation, and the augmentation generator.

The marker detector is classical (normalized cross-correlation against a
synthetic cross-hair template).  A learned detector can be swapped in behind
``detect_markers`` without touching anything downstream; the augmentation
generator exists to build training data for one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np
from scipy import ndimage, signal

from agvlab import geometry, imaging
from agvlab.geometry import DESTINATION_SIZE_MM, DropPoint, Homography
from agvlab.imaging import Morph


class AssignmentError(ValueError):
    def __init__(self, markers_detected: int, msg: str):
        self.markers_detected = markers_detected
        super().__init__(msg)


class NoJobError(ValueError):
    pass


class AmbiguityError(ValueError):
    def __init__(self, destinations: list[int]):
        self.destinations = sorted(destinations)
        super().__init__(f"drop areas found in destinations {self.destinations}")


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class MarkerDetection:
    x: float
    y: float
    score: float


@dataclass
class MarkerAssignment:
    """Grid index (i in 0..4, j in 0..1) -> detected marker centre (px)."""

    positions: dict[tuple[int, int], tuple[float, float]]
    complete: bool

    CORNERS = staticmethod(lambda k: [(k, 0), (k + 1, 0), (k, 1), (k + 1, 1)])

    def usable(self, k: int) -> bool:
        return all(c in self.positions for c in self.CORNERS(k))

    def usable_destinations(self) -> list[int]:
        return [k for k in range(4) if self.usable(k)]


@dataclass(frozen=True)
class DeliveryInfo:
    destination: int
    drop_x_mm: float
    drop_y_mm: float
    clearance_mm: float
    markers_detected: int


# --- marker detection ---------------------------------------------------------


def crosshair_template(half_size: int = 10, stroke: int = 3) -> np.ndarray:
    """Synthetic cross-hair: two perpendicular dark strokes on white."""
    size = 2 * half_size + 1
    t = np.full((size, size), 255, dtype=np.uint8)
    s0 = half_size - stroke // 2
    t[s0 : s0 + stroke, :] = 0
    t[:, s0 : s0 + stroke] = 0
    return t


def _normxcorr(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    a = image.astype(np.float64)
    t = template.astype(np.float64)
    t -= t.mean()
    n = t.size
    num = signal.fftconvolve(a, t[::-1, ::-1], mode="same")
    ones = np.ones(t.shape)
    s1 = signal.fftconvolve(a, ones, mode="same")
    s2 = signal.fftconvolve(a * a, ones, mode="same")
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    denom = np.sqrt(var * (t * t).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(denom > 1e-9, num / denom, 0.0)
    return np.clip(ncc, -1.0, 1.0)


def _subpixel_offset(f_m: float, f_0: float, f_p: float) -> float:
    denom = f_m - 2 * f_0 + f_p
    if abs(denom) < 1e-12:
        return 0.0
    return max(-0.5, min(0.5, 0.5 * (f_m - f_p) / denom))


def _is_crosslike(img: np.ndarray, x: int, y: int, half: int) -> bool:
    """Both cross arms must be dark against the quadrant background.

    A straight grid line correlates almost as well with the template as a
    true cross-hair, but it darkens only one arm; requiring comparable
    contrast on both arms rejects it.
    """
    h, w = img.shape
    if not (half <= x < w - half and half <= y < h - half):
        return False
    patch = img[y - half:y + half + 1, x - half:x + half + 1].astype(np.float64)
    c = half
    band, gap = 2, 4
    horiz = np.concatenate([patch[c - band:c + band + 1, :c - gap].ravel(),
                            patch[c - band:c + band + 1, c + gap + 1:].ravel()])
    vert = np.concatenate([patch[:c - gap, c - band:c + band + 1].ravel(),
                           patch[c + gap + 1:, c - band:c + band + 1].ravel()])
    quad = gap + 1
    bg = np.concatenate([patch[:c - quad, :c - quad].ravel(),
                         patch[:c - quad, c + quad + 1:].ravel(),
                         patch[c + quad + 1:, :c - quad].ravel(),
                         patch[c + quad + 1:, c + quad + 1:].ravel()])
    bg_mean = float(bg.mean())
    dark_h = bg_mean - float(horiz.mean())
    dark_v = bg_mean - float(vert.mean())
    strongest = max(dark_h, dark_v)
    if strongest < 10.0:
        return False
    return min(dark_h, dark_v) >= 0.5 * strongest


def detect_markers(img: np.ndarray, template_half_size: int = 10,
                   min_score: float = 0.55, nms_radius: float = 20.0,
                   max_detections: int = 32) -> list[MarkerDetection]:
    """NCC peaks against the cross-hair template, NMS'd, score-sorted."""
    template = crosshair_template(template_half_size)
    if img.shape[0] <= template.shape[0] or img.shape[1] <= template.shape[1]:
        raise ValueError("image must be larger than the template")
    ncc = _normxcorr(img, template)
    local_max = ndimage.maximum_filter(ncc, size=3)
    ys, xs = np.nonzero((ncc >= local_max) & (ncc >= min_score))
    order = np.argsort(ncc[ys, xs])[::-1]
    kept: list[MarkerDetection] = []
    h, w = ncc.shape
    for idx in order:
        y, x = int(ys[idx]), int(xs[idx])
        if any((d.x - x) ** 2 + (d.y - y) ** 2 < nms_radius**2 for d in kept):
            continue
        if not _is_crosslike(img, x, y, template_half_size):
            continue
        sx = sy = 0.0
        if 0 < x < w - 1:
            sx = _subpixel_offset(ncc[y, x - 1], ncc[y, x], ncc[y, x + 1])
        if 0 < y < h - 1:
            sy = _subpixel_offset(ncc[y - 1, x], ncc[y, x], ncc[y + 1, x])
        kept.append(MarkerDetection(x + sx, y + sy, float(ncc[y, x])))
        if len(kept) >= max_detections:
            break
    return kept


# --- tiling for learned-detector inference ------------------------------------


@dataclass(frozen=True)
class InferenceTile:
    image: np.ndarray          # 256x256
    x0: float
    y0: float
    sx: float                  # out px per source px
    sy: float

    def to_image(self, x: float, y: float) -> tuple[float, float]:
        return self.x0 + x / self.sx, self.y0 + y / self.sy


def segment_for_inference(img: np.ndarray, out: int = 256) -> list[InferenceTile]:
    """5x2 tiling of the overhead frame, each tile resized to 256x256."""
    h, w = img.shape
    if h < 10 or w < 10:
        raise ValueError("image too small to tile")
    cols, rows = 5, 2
    tiles = []
    for r in range(rows):
        for c in range(cols):
            x0 = round(c * w / cols)
            x1 = round((c + 1) * w / cols)
            y0 = round(r * h / rows)
            y1 = round((r + 1) * h / rows)
            src = img[y0:y1, x0:x1]
            sh, sw = src.shape
            sx = (out - 1) / (sw - 1)
            sy = (out - 1) / (sh - 1)
            # out pixel (u, v) samples source (u/sx, v/sy)
            hinv = np.array([[1 / sx, 0, 0], [0, 1 / sy, 0], [0, 0, 1.0]])
            from agvlab import kernels

            resized = kernels.warp_bilinear(
                np.ascontiguousarray(src), hinv, out, out, 255)
            tiles.append(InferenceTile(resized, float(x0), float(y0), sx, sy))
    return tiles


# --- marker-grid assignment ----------------------------------------------------


def _fit_homography_lsq(world: np.ndarray, px: np.ndarray) -> Homography:
    """Least-squares DLT over >= 4 correspondences (SVD on the 2n x 9 system)."""
    a = []
    for (x, y), (u, v) in zip(world, px):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    _, _, vt = np.linalg.svd(np.asarray(a))
    return Homography(vt[-1].reshape(3, 3))


def _match_inliers(h: Homography, grid_world: np.ndarray,
                   grid_idx: list[tuple[int, int]],
                   dets: list[MarkerDetection], tol: float):
    """Greedy nearest assignment of detections to projected grid nodes."""
    proj = h.apply(grid_world)
    pts = np.array([(d.x, d.y) for d in dets])
    used_g, used_d = set(), set()
    assigned: dict[tuple[int, int], tuple[float, float]] = {}
    err = 0.0
    # greedy over all grid/detection pairs within tolerance, closest first
    all_pairs = []
    for gi, p in enumerate(proj):
        d2 = np.sum((pts - p) ** 2, axis=1)
        for di in range(len(dets)):
            if d2[di] <= tol * tol:
                all_pairs.append((float(d2[di]), gi, di))
    all_pairs.sort()
    for d2, gi, di in all_pairs:
        if gi in used_g or di in used_d:
            continue
        used_g.add(gi)
        used_d.add(di)
        assigned[grid_idx[gi]] = (dets[di].x, dets[di].y)
        err += d2
    return assigned, err


def _candidate_grid_quads(grid_idx: list[tuple[int, int]]):
    """Ordered 4-tuples of grid nodes with two per row (no collinear triple)."""
    row0 = [g for g in grid_idx if g[1] == 0]
    row1 = [g for g in grid_idx if g[1] == 1]
    for a in combinations(row0, 2):
        for b in combinations(row1, 2):
            quad = list(a) + list(b)
            yield from permutations(quad)


def assign_markers(dets: list[MarkerDetection],
                   layout: np.ndarray | None = None,
                   image_size: tuple[int, int] | None = None,
                   inlier_tol: float = 10.0) -> MarkerAssignment:
    """Robust fit of detections onto the 5x2 marker grid.

    Tries the bounding quad of the detections against the grid corners first;
    falls back to exhaustive correspondence of the four strongest detections
    over all valid grid 4-subsets.
    """
    grid_idx = [(i, j) for j in (0, 1) for i in range(5)]
    if layout is None:
        layout = np.array([(i * DESTINATION_SIZE_MM, j * DESTINATION_SIZE_MM)
                           for i, j in grid_idx])
    if len(dets) < 4:
        raise AssignmentError(len(dets), f"only {len(dets)} markers detected")

    pts = np.array([(d.x, d.y) for d in dets])

    def try_quads(det_quads, grid_quads):
        best = None
        for dq in det_quads:
            src_px = pts[list(dq)]
            for gq in grid_quads:
                world4 = np.array([layout[grid_idx.index(g)] for g in gq])
                try:
                    h = geometry.homography_from_points(world4, src_px)
                except geometry.DegenerateGeometryError:
                    continue
                assigned, err = _match_inliers(h, layout, grid_idx, dets, inlier_tol)
                if len(assigned) < 4:
                    continue
                key = (-len(assigned), err)
                if best is None or key < best[0]:
                    best = (key, assigned)
        return best

    # fast path: extreme detections matched to the grid's outer corners
    sums = pts[:, 0] + pts[:, 1]
    diffs = pts[:, 0] - pts[:, 1]
    extreme = (int(np.argmin(sums)), int(np.argmax(diffs)),
               int(np.argmin(diffs)), int(np.argmax(sums)))
    corner_quad = [(0, 0), (4, 0), (0, 1), (4, 1)]
    best = None
    if len(set(extreme)) == 4:
        best = try_quads([extreme], [corner_quad])
        if best is not None and len(best[1]) < max(4, int(0.8 * min(len(dets), 10))):
            best = None  # weak fit; fall back to the exhaustive search
    if best is None:
        order = np.argsort([-d.score for d in dets])[:4]
        best = try_quads([tuple(int(i) for i in order)],
                         list(_candidate_grid_quads(grid_idx)))
    if best is None:
        raise AssignmentError(len(dets), "no consistent marker-grid fit")

    assigned = best[1]
    # refine with a least-squares fit over all inliers, then re-assign
    world = np.array([layout[grid_idx.index(g)] for g in assigned])
    px = np.array(list(assigned.values()))
    try:
        h = _fit_homography_lsq(world, px)
        refined, _ = _match_inliers(h, layout, grid_idx, dets, inlier_tol)
        if len(refined) >= len(assigned):
            assigned = refined
    except geometry.DegenerateGeometryError:
        pass
    return MarkerAssignment(assigned, complete=len(assigned) == 10)


# --- destination isolation & drop-zone extraction ------------------------------

CANONICAL_TILE = int(DESTINATION_SIZE_MM)  # 280 px, 1 px = 1 mm
BORDER_BAND_PX = 12
MIN_CLASS_SEPARATION = 40  # intensity gap required to accept a segmentation


class IsolationError(ValueError):
    pass


def isolate_destination(img: np.ndarray, asg: MarkerAssignment, k: int) -> np.ndarray:
    """Rectify destination k into the canonical 280x280 tile (1 px = 1 mm)."""
    if k not in (0, 1, 2, 3):
        raise IsolationError(f"destination must be 0-3, got {k}")
    if not asg.usable(k):
        raise IsolationError(f"destination {k} has unassigned corner markers")
    corners = [asg.positions[c] for c in MarkerAssignment.CORNERS(k)]
    s = float(CANONICAL_TILE)
    dst = np.array([(0, 0), (s, 0), (0, s), (s, s)])
    h = geometry.homography_from_points(np.asarray(corners), dst)
    return geometry.warp_image(img, h, CANONICAL_TILE, CANONICAL_TILE, fill=255)


def extract_drop_polygon(tile: np.ndarray, epsilon: float = 2.0) -> np.ndarray:
    """OTSU -> morphological opening -> border masking -> traced polygon."""
    t, bits = imaging.segment_otsu(tile)
    m0, m1 = imaging.otsu_class_means(tile, t)
    if not (math.isfinite(m0) and math.isfinite(m1)) or m1 - m0 < MIN_CLASS_SEPARATION:
        raise geometry.MaskExtractionError(0)  # no dark surface present
    bits = imaging.morph(imaging.morph(bits, Morph.ERODE), Morph.DILATE)
    b = BORDER_BAND_PX
    bits[:b, :] = 0
    bits[-b:, :] = 0
    bits[:, :b] = 0
    bits[:, -b:] = 0
    return geometry.polygon_from_mask(bits, epsilon)


def compute_delivery(img: np.ndarray, destination: int | None = None) -> DeliveryInfo:
    """Full edge pipeline: detect, assign, isolate, extract, solve, translate.

    ``destination`` restricts the search to one square, which is how an
    operator's explicit choice resolves an otherwise ambiguous scene.
    """
    dets = detect_markers(img)
    asg = assign_markers(dets, image_size=(img.shape[1], img.shape[0]))
    candidates = asg.usable_destinations()
    if destination is not None:
        candidates = [k for k in candidates if k == destination]
    found: dict[int, np.ndarray] = {}
    for k in candidates:
        tile = isolate_destination(img, asg, k)
        try:
            found[k] = extract_drop_polygon(tile)
        except geometry.MaskExtractionError:
            continue
    if not found:
        raise NoJobError("no drop area found in any destination")
    if len(found) > 1:
        raise AmbiguityError(list(found))
    (k, poly), = found.items()
    drop = geometry.polylabel(poly, precision=1.0)
    wx, wy = geometry.px_to_world((drop.x, drop.y), k)
    return DeliveryInfo(
        destination=k,
        drop_x_mm=wx,
        drop_y_mm=wy,
        clearance_mm=drop.radius,
        markers_detected=len(asg.positions),
    )


# --- training-data augmentation -------------------------------------------------


@dataclass
class AugmentationSpec:
    train_count: int = 1024
    test_count: int = 128
    crop_min: float = 0.25
    crop_max: float = 0.9
    max_rotation_deg: float = 45.0
    out_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.train_count <= 0 or self.test_count <= 0:
            raise GenerationError("sample counts must be positive")
        if not (0 < self.crop_min <= self.crop_max <= 1.0):
            raise GenerationError("crop fractions must satisfy 0 < min <= max <= 1")


@dataclass
class SamplePair:
    image: np.ndarray
    label: np.ndarray
    transform: dict
    split: str


def crop_transform(center: tuple[float, float], size: tuple[float, float],
                   angle_deg: float, out: int) -> np.ndarray:
    """3x3 affine mapping output px -> master px for a rotated rectangle."""
    cx, cy = center
    w, h = size
    a = math.radians(angle_deg)
    ca, sa = math.cos(a), math.sin(a)
    sx = (w - 1) / (out - 1)
    sy = (h - 1) / (out - 1)
    # out (u, v) -> rect frame -> rotate -> translate
    return np.array([
        [ca * sx, -sa * sy, cx - ca * sx * (out - 1) / 2 + sa * sy * (out - 1) / 2],
        [sa * sx, ca * sy, cy - sa * sx * (out - 1) / 2 - ca * sy * (out - 1) / 2],
        [0.0, 0.0, 1.0],
    ])


def _rect_corners(center, size, angle_deg) -> np.ndarray:
    cx, cy = center
    w, h = size
    a = math.radians(angle_deg)
    ca, sa = math.cos(a), math.sin(a)
    out = []
    for dx, dy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        x = dx * (w - 1) / 2
        y = dy * (h - 1) / 2
        out.append((cx + ca * x - sa * y, cy + sa * x + ca * y))
    return np.array(out)


def extract_rotated(master: np.ndarray, label: np.ndarray, center, size,
                    angle_deg: float, out: int = 256) -> tuple[np.ndarray, np.ndarray, dict]:
    """Cut the same rotated rectangle from master and label, resized to out^2."""
    from agvlab import kernels

    m = crop_transform(center, size, angle_deg, out)
    mc = np.ascontiguousarray(m)
    src = np.require(master, dtype=np.uint8, requirements=["C", "W"])
    img = kernels.warp_bilinear(src, mc, out, out, 255)
    lab_src = (np.asarray(label) > 0).astype(np.uint8) * 255
    lab = kernels.warp_bilinear(lab_src, mc, out, out, 0)
    lab = (lab >= 128).astype(np.uint8) * 255
    transform = {
        "center": [float(center[0]), float(center[1])],
        "size": [float(size[0]), float(size[1])],
        "angle_deg": float(angle_deg),
        "out_to_master": m.tolist(),
        "master_to_out": np.linalg.inv(m).tolist(),
    }
    return img, lab, transform


def augment_dataset(master: np.ndarray, master_label: np.ndarray,
                    spec: AugmentationSpec) -> tuple[list[SamplePair], list[SamplePair]]:
    """Randomly extract rotated rectangles identically from master and label.

    Deterministic for a fixed spec seed.  Raises GenerationError when a
    rectangle cannot be placed inside the master after 100 attempts.
    """
    if master.shape != master_label.shape:
        raise GenerationError(
            f"master {master.shape} and label {master_label.shape} differ")
    h, w = master.shape
    rng = np.random.default_rng(spec.seed)

    def one(split: str) -> SamplePair:
        for _ in range(100):
            fw = rng.uniform(spec.crop_min, spec.crop_max)
            fh = rng.uniform(spec.crop_min, spec.crop_max)
            size = (fw * w, fh * h)
            angle = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg)
            center = (rng.uniform(0, w - 1), rng.uniform(0, h - 1))
            corners = _rect_corners(center, size, angle)
            if (corners[:, 0] >= 0).all() and (corners[:, 0] <= w - 1).all() \
                    and (corners[:, 1] >= 0).all() and (corners[:, 1] <= h - 1).all():
                img, lab, tf = extract_rotated(master, master_label, center, size,
                                               angle, spec.out_size)
                return SamplePair(img, lab, tf, split)
        raise GenerationError("could not place a crop rectangle in 100 attempts")

    train = [one("train") for _ in range(spec.train_count)]
    test = [one("test") for _ in range(spec.test_count)]
    return train, test
