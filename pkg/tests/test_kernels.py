"""Backend equivalence and basic behavior of the compiled/pure kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from agvlab.kernels import _pure

try:
    from agvlab.kernels import _core
except ImportError:  # pragma: no cover - compiled backend optional
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled backend not built")

images = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2,
                                               min_side=3, max_side=48))
bitmaps = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2,
                                                min_side=3, max_side=48),
                     elements=st.integers(0, 1))


class TestBlur3:
    def test_constant_image_unchanged(self):
        img = np.full((16, 16), 77, dtype=np.uint8)
        assert (_pure.blur3(img) == 77).all()

    def test_known_3x3(self):
        img = np.zeros((3, 3), dtype=np.uint8)
        img[1, 1] = 16
        # centre weight 4/16 with edge replication of the zero border
        assert _pure.blur3(img)[1, 1] == 4

    def test_output_dtype_and_shape(self):
        img = np.arange(30, dtype=np.uint8).reshape(5, 6)
        out = _pure.blur3(img)
        assert out.shape == img.shape and out.dtype == np.uint8

    @needs_core
    @settings(max_examples=60, deadline=None)
    @given(images)
    def test_backends_bit_identical(self, img):
        np.testing.assert_array_equal(_pure.blur3(img), _core.blur3(img.copy()))


class TestMorph3:
    def test_erode_removes_isolated_pixel(self):
        bits = np.zeros((7, 7), dtype=np.uint8)
        bits[3, 3] = 1
        assert _pure.morph3(bits, True).sum() == 0

    def test_dilate_grows_pixel_to_block(self):
        bits = np.zeros((7, 7), dtype=np.uint8)
        bits[3, 3] = 1
        out = _pure.morph3(bits, False)
        assert out.sum() == 9 and out[2:5, 2:5].all()

    def test_erode_pads_ones_at_border(self):
        bits = np.ones((5, 5), dtype=np.uint8)
        assert _pure.morph3(bits, True).all()

    def test_dilate_pads_zeros_at_border(self):
        bits = np.zeros((5, 5), dtype=np.uint8)
        assert _pure.morph3(bits, False).sum() == 0

    @needs_core
    @settings(max_examples=60, deadline=None)
    @given(bitmaps, st.booleans())
    def test_backends_bit_identical(self, bits, erode):
        np.testing.assert_array_equal(
            _pure.morph3(bits, erode), _core.morph3(bits.copy(), erode))


class TestWarpBilinear:
    IDENTITY = np.eye(3)

    def test_identity_preserves_interior(self):
        img = np.random.default_rng(0).integers(0, 256, (20, 20), dtype=np.uint8)
        out = _pure.warp_bilinear(img, self.IDENTITY, 20, 20, 0)
        np.testing.assert_array_equal(out[:-1, :-1], img[:-1, :-1])

    def test_translation_shifts(self):
        img = np.zeros((10, 10), dtype=np.uint8)
        img[4, 4] = 200
        h = np.eye(3)
        h[0, 2] = 2.0  # out (u,v) -> src (u+2, v)
        out = _pure.warp_bilinear(img, h, 10, 10, 0)
        assert out[4, 2] == 200

    def test_outside_is_fill(self):
        img = np.zeros((5, 5), dtype=np.uint8)
        h = np.eye(3)
        h[0, 2] = 100.0
        out = _pure.warp_bilinear(img, h, 5, 5, 123)
        assert (out == 123).all()

    def test_nonfinite_map_is_fill(self):
        # a projective map with w ~ 0 along a line must not crash
        img = np.full((8, 8), 50, dtype=np.uint8)
        h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 1e-12]])
        out = _pure.warp_bilinear(img, h, 8, 8, 9)
        assert out.shape == (8, 8)

    @needs_core
    @settings(max_examples=40, deadline=None)
    @given(images, st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 2.0))
    def test_backends_bit_identical(self, img, tx, ty, scale):
        h = np.array([[scale, 0.0, tx], [0.0, scale, ty], [0.0, 0.0, 1.0]])
        a = _pure.warp_bilinear(img, h, 16, 16, 255)
        b = _core.warp_bilinear(img.copy(), np.ascontiguousarray(h), 16, 16, 255)
        np.testing.assert_array_equal(a, b)

    @needs_core
    def test_projective_backends_identical(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (40, 40), dtype=np.uint8)
        h = np.array([[0.9, 0.1, 2.0], [-0.05, 1.1, -1.0], [1e-4, -2e-4, 1.0]])
        a = _pure.warp_bilinear(img, h, 32, 32, 7)
        b = _core.warp_bilinear(img.copy(), np.ascontiguousarray(h), 32, 32, 7)
        np.testing.assert_array_equal(a, b)


def test_backend_env_override(monkeypatch):
    import importlib

    import agvlab.kernels as k

    monkeypatch.setenv("AGVLAB_PURE", "1")
    mod = importlib.reload(k)
    assert mod.BACKEND == "pure"
    monkeypatch.delenv("AGVLAB_PURE")
    mod = importlib.reload(k)
    assert mod.BACKEND in ("compiled", "pure")
