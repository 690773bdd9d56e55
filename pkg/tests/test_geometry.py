"""Homography, polygon primitives, polylabel, and mask-to-polygon tracing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvlab import geometry
from agvlab.geometry import (
    DegenerateGeometryError,
    Homography,
    MaskExtractionError,
    homography_from_points,
    point_in_polygon,
    point_polygon_distance,
    polygon_from_mask,
    polylabel,
    px_to_world,
    warp_image,
)

SQUARE = np.array([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)])


def polylabel_grid_oracle(poly: np.ndarray, step: float = 0.25):
    """Brute-force pole of inaccessibility on a regular grid (vectorized)."""
    v = np.asarray(poly, dtype=np.float64)
    min_x, min_y = v.min(axis=0)
    max_x, max_y = v.max(axis=0)
    xs = np.arange(min_x, max_x + step / 2, step)
    ys = np.arange(min_y, max_y + step / 2, step)
    gx, gy = np.meshgrid(xs, ys)
    px, py = gx.ravel(), gy.ravel()

    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    d = np.full(px.shape, np.inf)
    inside = np.zeros(px.shape, dtype=bool)
    for i in range(n):
        ax, ay = a[i]
        bx, by = b[i]
        dx, dy = bx - ax, by - ay
        denom = dx * dx + dy * dy
        t = np.clip(((px - ax) * dx + (py - ay) * dy) / denom, 0.0, 1.0) \
            if denom > 0 else 0.0
        d = np.minimum(d, np.hypot(px - (ax + t * dx), py - (ay + t * dy)))
        # even-odd ray cast, matching the half-open edge rule
        cond = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * dx / (dy if dy != 0 else np.inf)
        inside ^= cond & (px < xint)
    d = np.where(inside, d, -d)
    k = int(np.argmax(d))
    return px[k], py[k], float(d[k])


class TestHomography:
    def test_four_point_exact(self):
        src = np.array([(0, 0), (100, 0), (100, 50), (0, 50)], dtype=np.float64)
        dst = np.array([(3, 7), (120, -2), (110, 60), (-5, 44)], dtype=np.float64)
        h = homography_from_points(src, dst)
        np.testing.assert_allclose(h.apply(src), dst, atol=1e-8)

    def test_residual_below_tolerance(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            src = rng.uniform(0, 200, (4, 2))
            dst = src + rng.uniform(-30, 30, (4, 2))
            try:
                h = homography_from_points(src, dst)
            except DegenerateGeometryError:
                continue
            residual = np.abs(h.apply(src) - dst).max()
            assert residual < 1e-6

    def test_inverse_roundtrip(self):
        src = np.array([(0, 0), (10, 0), (10, 10), (0, 10)], dtype=np.float64)
        dst = np.array([(1, 1), (12, -1), (11, 12), (-1, 9)], dtype=np.float64)
        h = homography_from_points(src, dst)
        np.testing.assert_allclose(h.inverse().apply(dst), src, atol=1e-8)

    def test_normalized_h22(self):
        h = Homography(2.0 * np.eye(3))
        assert h.matrix[2, 2] == 1.0

    def test_collinear_points_rejected(self):
        src = np.array([(0, 0), (1, 1), (2, 2), (3, 0)], dtype=np.float64)
        dst = SQUARE
        with pytest.raises(DegenerateGeometryError):
            homography_from_points(src, dst)

    def test_singular_matrix_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            Homography(np.zeros((3, 3)))


class TestWarpImage:
    def test_identity(self):
        img = np.random.default_rng(1).integers(0, 256, (12, 12), dtype=np.uint8)
        out = warp_image(img, Homography(np.eye(3)), 12, 12)
        np.testing.assert_array_equal(out[:-1, :-1], img[:-1, :-1])

    def test_read_only_input_ok(self):
        img = np.zeros((8, 8), dtype=np.uint8)
        img.setflags(write=False)
        warp_image(img, Homography(np.eye(3)), 8, 8)

    def test_off_image_fill(self):
        img = np.zeros((4, 4), dtype=np.uint8)
        h = Homography(np.array([[1, 0, 1000.0], [0, 1, 0], [0, 0, 1]]))
        assert (warp_image(img, h, 4, 4, fill=200) == 200).all()


class TestPolygonPrimitives:
    def test_signed_area_ccw_positive(self):
        assert geometry.signed_area(SQUARE) == 100.0
        assert geometry.signed_area(SQUARE[::-1]) == -100.0

    def test_ensure_ccw_flips(self):
        np.testing.assert_array_equal(geometry.ensure_ccw(SQUARE[::-1]), SQUARE)

    def test_simple_polygon(self):
        assert geometry.is_simple_polygon(SQUARE)
        bowtie = np.array([(0, 0), (10, 10), (10, 0), (0, 10)], dtype=np.float64)
        assert not geometry.is_simple_polygon(bowtie)

    def test_point_in_polygon(self):
        assert point_in_polygon((5, 5), SQUARE)
        assert not point_in_polygon((15, 5), SQUARE)

    def test_point_polygon_distance_signs(self):
        assert point_polygon_distance((5, 5), SQUARE) == pytest.approx(5.0)
        assert point_polygon_distance((-3, 5), SQUARE) == pytest.approx(-3.0)

    def test_px_to_world(self):
        assert px_to_world((140, 70), 2) == (2 * 280 + 140, 70)
        with pytest.raises(ValueError):
            px_to_world((300, 0), 0)
        with pytest.raises(ValueError):
            px_to_world((1, 1), 7)


def random_simple_polygon(rng: np.random.Generator) -> np.ndarray:
    """Convex blob, star, or L/T rectilinear shape (always simple)."""
    kind = rng.integers(0, 3)
    if kind == 0:  # convex-ish blob
        n = int(rng.integers(4, 10))
        angles = np.sort(rng.uniform(0, 2 * math.pi, n))
        radii = rng.uniform(20, 60, n)
        pts = np.c_[np.cos(angles), np.sin(angles)] * radii[:, None]
        return pts + rng.uniform(60, 80, 2)
    if kind == 1:  # star
        n = int(rng.integers(4, 7))
        angles = np.linspace(0, 2 * math.pi, 2 * n, endpoint=False)
        radii = np.where(np.arange(2 * n) % 2 == 0,
                         rng.uniform(45, 60), rng.uniform(18, 30))
        pts = np.c_[np.cos(angles), np.sin(angles)] * radii[:, None]
        return pts + 70.0
    w, h = rng.uniform(50, 100, 2)
    aw, ah = rng.uniform(15, w - 15), rng.uniform(15, h - 15)
    return np.array([(0, 0), (w, 0), (w, ah), (aw, ah), (aw, h), (0, h)]) + 10.0


class TestPolylabel:
    def test_square_centre(self):
        p = polylabel(SQUARE, precision=0.01)
        assert (p.x, p.y) == pytest.approx((5.0, 5.0), abs=0.05)
        assert p.radius == pytest.approx(5.0, abs=0.05)

    def test_rectangle_clearance_is_half_short_side(self):
        rect = np.array([(0, 0), (40, 0), (40, 10), (0, 10)], dtype=np.float64)
        p = polylabel(rect, precision=0.01)
        assert p.radius == pytest.approx(5.0, abs=0.05)
        assert p.y == pytest.approx(5.0, abs=0.05)

    def test_point_strictly_interior(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            poly = geometry.ensure_ccw(random_simple_polygon(rng))
            if not geometry.is_simple_polygon(poly):
                continue
            p = polylabel(poly, precision=0.5)
            assert point_polygon_distance((p.x, p.y), poly) > 0

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            poly = geometry.ensure_ccw(random_simple_polygon(rng))
            if not geometry.is_simple_polygon(poly):
                continue
            p = polylabel(poly, precision=1.0)
            _, _, oracle_r = polylabel_grid_oracle(poly)
            assert abs(p.radius - oracle_r) <= 1.0 + 0.25 * math.sqrt(2)

    def test_degenerate_rejected(self):
        line = np.array([(0, 0), (5, 5), (10, 10)], dtype=np.float64)
        with pytest.raises(DegenerateGeometryError):
            polylabel(line)
        with pytest.raises(ValueError):
            polylabel(SQUARE, precision=0.0)


class TestMaskToPolygon:
    def test_rectangle_mask(self):
        mask = np.zeros((40, 40), dtype=np.uint8)
        mask[5:25, 8:30] = 1
        poly = polygon_from_mask(mask, epsilon=1.0)
        assert len(poly) == 4
        assert geometry.signed_area(poly) > 0
        xs, ys = poly[:, 0], poly[:, 1]
        assert {int(xs.min()), int(xs.max())} == {8, 29}
        assert {int(ys.min()), int(ys.max())} == {5, 24}

    def test_l_shape_keeps_concave_corner(self):
        mask = np.zeros((50, 50), dtype=np.uint8)
        mask[5:45, 5:20] = 1
        mask[30:45, 5:45] = 1
        poly = polygon_from_mask(mask, epsilon=1.0)
        assert len(poly) == 6

    def test_small_specks_ignored(self):
        mask = np.zeros((40, 40), dtype=np.uint8)
        mask[5:25, 8:30] = 1
        mask[35, 35] = 1  # 1-px noise
        poly = polygon_from_mask(mask, epsilon=1.0)
        assert len(poly) == 4

    def test_empty_mask_raises(self):
        with pytest.raises(MaskExtractionError) as exc:
            polygon_from_mask(np.zeros((10, 10), dtype=np.uint8))
        assert exc.value.component_count == 0

    def test_two_components_raise_with_count(self):
        mask = np.zeros((40, 80), dtype=np.uint8)
        mask[5:25, 5:25] = 1
        mask[5:25, 40:60] = 1
        with pytest.raises(MaskExtractionError) as exc:
            polygon_from_mask(mask)
        assert exc.value.component_count == 2

    def test_trace_single_pixel_component_is_noise(self):
        mask = np.zeros((10, 10), dtype=np.uint8)
        mask[4, 4] = 1
        with pytest.raises(MaskExtractionError):
            polygon_from_mask(mask)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_traced_polygon_contains_component_centroid(self, seed):
        rng = np.random.default_rng(seed)
        x0, y0 = rng.integers(2, 10, 2)
        w, h = rng.integers(8, 20, 2)
        mask = np.zeros((40, 40), dtype=np.uint8)
        mask[y0 : y0 + h, x0 : x0 + w] = 1
        poly = polygon_from_mask(mask, epsilon=1.0)
        cx, cy = x0 + (w - 1) / 2, y0 + (h - 1) / 2
        assert point_in_polygon((cx, cy), poly)
