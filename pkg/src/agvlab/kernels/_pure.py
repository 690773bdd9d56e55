"""NumPy implementations of the hot per-frame kernels.

Used as the fallback when the compiled extension is unavailable (or when
AGVLAB_PURE=1).  The compiled versions in ``_core.pyx`` must produce
bit-identical output; ``tests/test_kernels.py`` enforces that.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def blur3(img: np.ndarray) -> np.ndarray:
    """3x3 binomial blur (1/16 [1 2 1; 2 4 2; 1 2 1]), edge-replicated borders.

    Rounds to nearest, halves up.  Input and output are uint8 (h, w).
    """
    p = np.pad(img, 1, mode="edge").astype(np.uint16)
    rows = p[:, :-2] + 2 * p[:, 1:-1] + p[:, 2:]
    acc = rows[:-2] + 2 * rows[1:-1] + rows[2:]
    return ((acc + 8) >> 4).astype(np.uint8)


def morph3(bits: np.ndarray, erode: bool) -> np.ndarray:
    """3x3 square erosion/dilation on a uint8 0/1 raster.

    Out-of-bounds neighbours count as 1 for erosion and 0 for dilation, so
    a path touching the border is not eaten away artificially.
    """
    pad = 1 if erode else 0
    p = np.pad(bits, 1, mode="constant", constant_values=pad)
    stack = [
        p[dy : dy + bits.shape[0], dx : dx + bits.shape[1]]
        for dy in range(3)
        for dx in range(3)
    ]
    if erode:
        out = np.minimum.reduce(stack)
    else:
        out = np.maximum.reduce(stack)
    return out.astype(np.uint8)


def warp_bilinear(
    src: np.ndarray, hinv: np.ndarray, out_w: int, out_h: int, fill: int
) -> np.ndarray:
    """Inverse-map a projective warp with bilinear sampling.

    ``hinv`` maps output pixel coords (x, y, 1) back into source coords.
    Samples falling outside the source raster get ``fill``.
    """
    xs, ys = np.meshgrid(
        np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64)
    )
    u = hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]
    v = hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]
    w = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    u = u / w
    v = v / w
    # points at/behind the camera plane divide by ~0; treat them as outside
    bad = ~(np.isfinite(u) & np.isfinite(v))
    u = np.where(bad, -1.0, u)
    v = np.where(bad, -1.0, v)

    h, wd = src.shape
    x0 = np.floor(u)
    y0 = np.floor(v)
    fx = u - x0
    fy = v - y0
    inside = (u >= 0) & (v >= 0) & (u <= wd - 1) & (v <= h - 1)

    x0i = np.clip(x0, 0, wd - 2).astype(np.intp)
    y0i = np.clip(y0, 0, h - 2).astype(np.intp)
    # exact-edge samples: keep the fractional weight consistent with the clip
    fx = np.where(inside, u - x0i, 0.0)
    fy = np.where(inside, v - y0i, 0.0)

    a = src[y0i, x0i].astype(np.float64)
    b = src[y0i, x0i + 1].astype(np.float64)
    c = src[y0i + 1, x0i].astype(np.float64)
    d = src[y0i + 1, x0i + 1].astype(np.float64)
    val = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    out = np.floor(val + 0.5)
    out[~inside] = fill
    return out.astype(np.uint8)
