"""Pixel-level primitives shared by the onboard and edge pipelines.

Grayscale images are uint8 arrays of shape (h, w); binary images are uint8
0/1 arrays of the same shape where 1 marks path/dark pixels.  All functions
are pure; none mutates its input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from PIL import Image

from agvlab import kernels


class ImagingError(ValueError):
    pass


class Morph(enum.Enum):
    ERODE = "erode"
    DILATE = "dilate"


@dataclass(frozen=True)
class RoiSpec:
    """Rectangular window, px offsets/extents, must fit inside its image."""

    x0: int
    y0: int
    w: int
    h: int

    def validate(self, img: np.ndarray) -> None:
        ih, iw = img.shape[:2]
        if self.w <= 0 or self.h <= 0:
            raise ImagingError(f"empty ROI {self}")
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.w > iw or self.y0 + self.h > ih:
            raise ImagingError(f"ROI {self} outside {iw}x{ih} image")

    def slice(self, img: np.ndarray) -> np.ndarray:
        self.validate(img)
        return img[self.y0 : self.y0 + self.h, self.x0 : self.x0 + self.w]


@dataclass(frozen=True)
class BoundaryProfile:
    """Fraction of path pixels on each 1-px border strip of an ROI."""

    left: float
    right: float
    top: float
    bottom: float

    def mirrored(self) -> "BoundaryProfile":
        return BoundaryProfile(self.right, self.left, self.top, self.bottom)


def _check_nonempty(img: np.ndarray) -> None:
    if img.ndim < 2 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ImagingError(f"zero-dimension image with shape {img.shape}")


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    _check_nonempty(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImagingError(f"expected (h, w, 3) color image, got {rgb.shape}")
    f = rgb.astype(np.float64)
    luma = 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]
    return np.clip(np.round(luma), 0, 255).astype(np.uint8)


def gaussian_blur3(img: np.ndarray) -> np.ndarray:
    """3x3 binomial blur, edge-replicated borders, rounded to nearest."""
    _check_nonempty(img)
    return kernels.blur3(np.require(img, dtype=np.uint8, requirements=["C", "W"]))


def morph(bits: np.ndarray, op: Morph) -> np.ndarray:
    """3x3 square erosion/dilation over 1-valued path pixels."""
    _check_nonempty(bits)
    return kernels.morph3(
        np.require(bits, dtype=np.uint8, requirements=["C", "W"]), op is Morph.ERODE
    )


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold t maximizing between-class variance; smallest t on ties.

    Classes split as intensity <= t vs > t.  The variance comparison is done
    in exact integer arithmetic so tie-breaking is well defined:
    w0*w1*(mu0-mu1)^2 == (S0*w1 - S1*w0)^2 / (w0*w1) with integer counts.
    A single-populated-bin histogram returns that bin.
    """
    counts = [int(c) for c in np.asarray(hist)]
    if len(counts) != 256:
        raise ImagingError(f"expected 256-bin histogram, got {len(counts)}")
    total = sum(counts)
    total_sum = sum(i * c for i, c in enumerate(counts))
    populated = [i for i, c in enumerate(counts) if c > 0]
    if len(populated) == 1:
        return populated[0]
    best_t = 0
    best_num = -1  # numerator of best variance (denominator best_den)
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        s1 = total_sum - s0
        num = (s0 * w1 - s1 * w0) ** 2
        den = w0 * w1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def segment_otsu(img: np.ndarray) -> tuple[int, np.ndarray]:
    """Binarize by the OTSU threshold; <= t maps to 1 (path/dark).

    A constant image maps every pixel to 1 with t equal to that intensity.
    """
    _check_nonempty(img)
    flat = np.ascontiguousarray(img, dtype=np.uint8)
    hist = np.bincount(flat.ravel(), minlength=256)
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        t = int(nonzero[0])
        return t, np.ones_like(flat, dtype=np.uint8)
    t = otsu_threshold(hist)
    return t, (flat <= t).astype(np.uint8)


def otsu_class_means(img: np.ndarray, t: int) -> tuple[float, float]:
    """Mean intensity of the <= t and > t classes (nan when a class is empty)."""
    flat = np.asarray(img).ravel()
    low = flat[flat <= t]
    high = flat[flat > t]
    m0 = float(low.mean()) if low.size else float("nan")
    m1 = float(high.mean()) if high.size else float("nan")
    return m0, m1


def path_error(bits: np.ndarray, roi: RoiSpec) -> float | None:
    """Signed displacement of the ROI path centroid from the image symmetry axis.

    Positive means the path sits right of centre.  Returns None when the ROI
    holds no path pixels (the terminal signal).
    """
    window = roi.slice(bits)
    ys, xs = np.nonzero(window)
    if xs.size == 0:
        return None
    axis = (bits.shape[1] - 1) / 2.0
    return float(xs.mean() + roi.x0 - axis)


def boundary_profile(bits: np.ndarray, roi: RoiSpec) -> BoundaryProfile:
    """Path fraction on each 1-px-thick border strip of the ROI."""
    window = roi.slice(bits)
    return BoundaryProfile(
        left=float(window[:, 0].mean()),
        right=float(window[:, -1].mean()),
        top=float(window[0, :].mean()),
        bottom=float(window[-1, :].mean()),
    )


def roi_path_fraction(bits: np.ndarray, roi: RoiSpec) -> float:
    window = roi.slice(bits)
    return float(window.mean())


# --- image file I/O -------------------------------------------------------


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr.astype(np.uint8)


def write_png(path, img: np.ndarray) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path, format="PNG")


def encode_png(img: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def read_pgm(path) -> np.ndarray:
    """ASCII PGM (P2) reader for golden-file tests."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ImagingError(f"{path}: not an ASCII PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ImagingError(f"{path}: expected maxval 255, got {maxval}")
    data = np.array(tokens[4 : 4 + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ImagingError(f"{path}: expected {w * h} samples, got {data.size}")
    return data.reshape(h, w)


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in img:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
