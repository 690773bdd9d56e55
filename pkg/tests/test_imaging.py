"""Imaging primitives: grayscale, blur, OTSU, morphology, ROI measurements."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvlab import imaging
from agvlab.imaging import BoundaryProfile, ImagingError, Morph, RoiSpec


def otsu_bruteforce(hist):
    """Independent oracle: exact rational argmax of between-class variance,
    lowest t on ties (exhaustive, Fraction arithmetic)."""
    from fractions import Fraction

    counts = [int(c) for c in hist]
    total = sum(counts)
    best_t, best_v = 0, Fraction(-1)
    for t in range(256):
        w0 = sum(counts[: t + 1])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = Fraction(sum(i * counts[i] for i in range(t + 1)), w0)
        mu1 = Fraction(sum(i * counts[i] for i in range(t + 1, 256)), w1)
        v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_t, best_v = t, v
    return best_t


class TestGrayscale:
    def test_bt601_weights(self):
        rgb = np.zeros((1, 3, 3), dtype=np.uint8)
        rgb[0, 0] = (255, 0, 0)
        rgb[0, 1] = (0, 255, 0)
        rgb[0, 2] = (0, 0, 255)
        g = imaging.to_grayscale(rgb)
        assert list(g[0]) == [round(0.299 * 255), round(0.587 * 255), round(0.114 * 255)]

    def test_white_stays_white(self):
        rgb = np.full((2, 2, 3), 255, dtype=np.uint8)
        assert (imaging.to_grayscale(rgb) == 255).all()

    def test_rejects_bad_shape(self):
        with pytest.raises(ImagingError):
            imaging.to_grayscale(np.zeros((4, 4), dtype=np.uint8))


class TestOtsu:
    def test_bimodal_split(self):
        hist = np.zeros(256, dtype=np.int64)
        hist[40] = 100
        hist[200] = 100
        t = imaging.otsu_threshold(hist)
        assert 40 <= t < 200

    def test_single_bin_returns_that_bin(self):
        hist = np.zeros(256, dtype=np.int64)
        hist[133] = 7
        assert imaging.otsu_threshold(hist) == 133

    def test_tie_takes_smallest_t(self):
        # two populated bins: any t in [lo, hi) gives the same split
        hist = np.zeros(256, dtype=np.int64)
        hist[10] = 5
        hist[20] = 5
        assert imaging.otsu_threshold(hist) == 10

    def test_wrong_length_rejected(self):
        with pytest.raises(ImagingError):
            imaging.otsu_threshold(np.zeros(100))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_bruteforce_oracle(self, seed):
        rng = np.random.default_rng(seed)
        hist = rng.integers(0, 50, size=256)
        hist[rng.integers(0, 256)] += int(rng.integers(0, 1000))
        assert imaging.otsu_threshold(hist) == otsu_bruteforce(hist)

    def test_segment_constant_image_all_ones(self):
        img = np.full((5, 5), 99, dtype=np.uint8)
        t, bits = imaging.segment_otsu(img)
        assert t == 99 and bits.all()

    def test_segment_dark_line_on_light(self):
        img = np.full((10, 10), 220, dtype=np.uint8)
        img[:, 4:6] = 30
        t, bits = imaging.segment_otsu(img)
        assert 30 <= t < 220
        np.testing.assert_array_equal(bits[:, 4:6], 1)
        assert bits[:, :4].sum() == 0 and bits[:, 6:].sum() == 0

    def test_class_means(self):
        img = np.array([[10, 10, 200, 220]], dtype=np.uint8)
        m0, m1 = imaging.otsu_class_means(img, 100)
        assert m0 == 10.0 and m1 == 210.0


class TestRoi:
    def test_slice_window(self):
        img = np.arange(36, dtype=np.uint8).reshape(6, 6)
        roi = RoiSpec(1, 2, 3, 2)
        np.testing.assert_array_equal(roi.slice(img), img[2:4, 1:4])

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ImagingError):
            RoiSpec(0, 0, 7, 2).slice(np.zeros((6, 6), dtype=np.uint8))

    def test_empty_rejected(self):
        with pytest.raises(ImagingError):
            RoiSpec(0, 0, 0, 2).slice(np.zeros((6, 6), dtype=np.uint8))


class TestPathError:
    ROI = RoiSpec(0, 6, 10, 4)

    def test_centred_line_zero(self):
        bits = np.zeros((10, 11), dtype=np.uint8)
        bits[:, 5] = 1
        assert imaging.path_error(bits, RoiSpec(0, 6, 11, 4)) == 0.0

    def test_right_of_centre_positive(self):
        bits = np.zeros((10, 10), dtype=np.uint8)
        bits[:, 8] = 1
        err = imaging.path_error(bits, self.ROI)
        assert err == pytest.approx(8 - 4.5)

    def test_empty_roi_is_none(self):
        bits = np.zeros((10, 10), dtype=np.uint8)
        bits[0, 0] = 1  # outside the ROI
        assert imaging.path_error(bits, self.ROI) is None

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 9))
    def test_mirror_antisymmetry(self, col):
        bits = np.zeros((10, 10), dtype=np.uint8)
        bits[6:, col] = 1
        e = imaging.path_error(bits, self.ROI)
        e_m = imaging.path_error(bits[:, ::-1], self.ROI)
        assert e_m == pytest.approx(-e)


class TestBoundaryProfile:
    def test_strip_fractions(self):
        bits = np.zeros((8, 8), dtype=np.uint8)
        bits[0:4, 0] = 1   # half the left strip of a full-image ROI
        bits[0, :] = 1     # full top strip
        p = imaging.boundary_profile(bits, RoiSpec(0, 0, 8, 8))
        assert p == BoundaryProfile(left=0.5, right=1 / 8, top=1.0, bottom=0.0)

    def test_mirrored_swaps_sides(self):
        p = BoundaryProfile(0.2, 0.7, 0.1, 0.0)
        assert p.mirrored() == BoundaryProfile(0.7, 0.2, 0.1, 0.0)

    def test_roi_path_fraction(self):
        bits = np.zeros((4, 4), dtype=np.uint8)
        bits[0, 0] = 1
        assert imaging.roi_path_fraction(bits, RoiSpec(0, 0, 4, 4)) == 1 / 16


class TestFileIO:
    def test_png_roundtrip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 256, (9, 13), dtype=np.uint8)
        p = tmp_path / "img.png"
        imaging.write_png(p, img)
        np.testing.assert_array_equal(imaging.read_png(p), img)

    def test_encode_png_decodes(self, tmp_path):
        img = np.random.default_rng(2).integers(0, 256, (6, 6), dtype=np.uint8)
        data = imaging.encode_png(img)
        p = tmp_path / "e.png"
        p.write_bytes(data)
        np.testing.assert_array_equal(imaging.read_png(p), img)

    def test_pgm_roundtrip(self, tmp_path):
        img = np.random.default_rng(3).integers(0, 256, (4, 7), dtype=np.uint8)
        p = tmp_path / "img.pgm"
        imaging.write_pgm(p, img)
        np.testing.assert_array_equal(imaging.read_pgm(p), img)


class TestPipelineShape:
    def test_blur_then_otsu_then_open_keeps_line(self):
        img = np.full((30, 30), 210, dtype=np.uint8)
        img[:, 13:17] = 35
        out = imaging.gaussian_blur3(img)
        _, bits = imaging.segment_otsu(out)
        bits = imaging.morph(imaging.morph(bits, Morph.ERODE), Morph.DILATE)
        assert bits[:, 14:16].all()
        assert bits[:, :10].sum() == 0
