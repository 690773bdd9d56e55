# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the per-frame kernels.

Must stay bit-identical to ``_pure.py``; the equivalence tests compare the
two backends on random inputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, isfinite

cnp.import_array()

BACKEND = "compiled"


def blur3(cnp.uint8_t[:, :] img):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, :] o = out
    cdef Py_ssize_t y, x, ym, yp, xm, xp
    cdef unsigned int acc, r0, r1, r2
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            r0 = img[ym, xm] + 2u * img[ym, x] + img[ym, xp]
            r1 = img[y, xm] + 2u * img[y, x] + img[y, xp]
            r2 = img[yp, xm] + 2u * img[yp, x] + img[yp, xp]
            acc = r0 + 2u * r1 + r2
            o[y, x] = <cnp.uint8_t>((acc + 8u) >> 4)
    return out


def morph3(cnp.uint8_t[:, ::1] bits, bint erode):
    cdef Py_ssize_t h = bits.shape[0]
    cdef Py_ssize_t w = bits.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    cdef cnp.uint8_t pad = 1 if erode else 0
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] tmp_arr = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] t = tmp_arr
    cdef Py_ssize_t y, x
    cdef cnp.uint8_t a, b, c
    # a 3x3 min/max separates into a horizontal then a vertical 1x3 pass,
    # each padded with the same out-of-range value; the interior loops are
    # branch-free so the compiler can vectorize them
    if erode:
        for y in range(h):
            a = bits[y, 0]
            b = bits[y, 1] if w > 1 else pad
            t[y, 0] = min(min(pad, a), b)
            for x in range(1, w - 1):
                a = min(bits[y, x - 1], bits[y, x])
                t[y, x] = min(a, bits[y, x + 1])
            if w > 1:
                t[y, w - 1] = min(min(bits[y, w - 2], bits[y, w - 1]), pad)
        for x in range(w):
            a = t[0, x]
            b = t[1, x] if h > 1 else pad
            o[0, x] = min(min(pad, a), b)
        for y in range(1, h - 1):
            for x in range(w):
                a = min(t[y - 1, x], t[y, x])
                o[y, x] = min(a, t[y + 1, x])
        if h > 1:
            for x in range(w):
                o[h - 1, x] = min(min(t[h - 2, x], t[h - 1, x]), pad)
    else:
        for y in range(h):
            a = bits[y, 0]
            b = bits[y, 1] if w > 1 else pad
            t[y, 0] = max(max(pad, a), b)
            for x in range(1, w - 1):
                a = max(bits[y, x - 1], bits[y, x])
                t[y, x] = max(a, bits[y, x + 1])
            if w > 1:
                t[y, w - 1] = max(max(bits[y, w - 2], bits[y, w - 1]), pad)
        for x in range(w):
            a = t[0, x]
            b = t[1, x] if h > 1 else pad
            o[0, x] = max(max(pad, a), b)
        for y in range(1, h - 1):
            for x in range(w):
                a = max(t[y - 1, x], t[y, x])
                o[y, x] = max(a, t[y + 1, x])
        if h > 1:
            for x in range(w):
                o[h - 1, x] = max(max(t[h - 2, x], t[h - 1, x]), pad)
    return out


def warp_bilinear(cnp.uint8_t[:, :] src, cnp.float64_t[:, :] hinv,
                  Py_ssize_t out_w, Py_ssize_t out_h, int fill):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((out_h, out_w), dtype=np.uint8)
    cdef cnp.uint8_t[:, :] o = out
    cdef double h00 = hinv[0, 0], h01 = hinv[0, 1], h02 = hinv[0, 2]
    cdef double h10 = hinv[1, 0], h11 = hinv[1, 1], h12 = hinv[1, 2]
    cdef double h20 = hinv[2, 0], h21 = hinv[2, 1], h22 = hinv[2, 2]
    cdef Py_ssize_t y, x, x0, y0
    cdef double u, v, d, fx, fy, a, b, c, e, val
    cdef cnp.uint8_t f = <cnp.uint8_t>fill
    for y in range(out_h):
        for x in range(out_w):
            d = h20 * x + h21 * y + h22
            u = (h00 * x + h01 * y + h02) / d
            v = (h10 * x + h11 * y + h12) / d
            if not (isfinite(u) and isfinite(v)):
                o[y, x] = f
                continue
            if u < 0 or v < 0 or u > w - 1 or v > h - 1:
                o[y, x] = f
                continue
            x0 = <Py_ssize_t>floor(u)
            y0 = <Py_ssize_t>floor(v)
            if x0 > w - 2:
                x0 = w - 2
            if y0 > h - 2:
                y0 = h - 2
            fx = u - x0
            fy = v - y0
            a = src[y0, x0]
            b = src[y0, x0 + 1]
            c = src[y0 + 1, x0]
            e = src[y0 + 1, x0 + 1]
            val = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * e)
            o[y, x] = <cnp.uint8_t>floor(val + 0.5)
    return out
