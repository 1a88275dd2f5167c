# cython: language_level=3
"""Compiled kernels. Same contracts and accumulation order as _pykernels."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport floor

cnp.import_array()

NAME = "compiled"

cdef int _nthreads = 1


def set_num_threads(int n):
    global _nthreads
    _nthreads = n if n > 0 else 1


cdef inline Py_ssize_t _out_extent(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride,
                                   Py_ssize_t pad, Py_ssize_t dil) nogil:
    return (size + 2 * pad - dil * (k - 1) - 1) // stride + 1


cdef inline Py_ssize_t _first_valid(Py_ssize_t offset, Py_ssize_t stride) nogil:
    # smallest j >= 0 with j*stride + offset >= 0
    if offset >= 0:
        return 0
    return (-offset + stride - 1) // stride


cdef inline Py_ssize_t _end_valid(Py_ssize_t offset, Py_ssize_t stride,
                                  Py_ssize_t size, Py_ssize_t n_out) nogil:
    # one past the largest j < n_out with j*stride + offset <= size - 1
    cdef Py_ssize_t last = size - 1 - offset
    if last < 0:
        return 0
    last = last // stride + 1
    return last if last < n_out else n_out


def depthwise_conv(const float[:, :, :, ::1] x, const float[:, :, ::1] w,
                   int stride, int pad, int dil):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t oh = _out_extent(h, kh, stride, pad, dil)
    cdef Py_ssize_t ow = _out_extent(wd, kw, stride, pad, dil)
    out = np.zeros((n, c, oh, ow), dtype=np.float32)
    cdef float[:, :, :, ::1] o = out
    cdef Py_ssize_t nc, b, ch, ki, kj, i, j, ih, iw_off, ih_off, i_lo, i_hi, j_lo, j_hi
    cdef float wv
    for nc in prange(n * c, nogil=True, num_threads=_nthreads, schedule="static"):
        b = nc // c
        ch = nc % c
        for ki in range(kh):
            ih_off = ki * dil - pad
            i_lo = _first_valid(ih_off, stride)
            i_hi = _end_valid(ih_off, stride, h, oh)
            for kj in range(kw):
                wv = w[ch, ki, kj]
                iw_off = kj * dil - pad
                j_lo = _first_valid(iw_off, stride)
                j_hi = _end_valid(iw_off, stride, wd, ow)
                for i in range(i_lo, i_hi):
                    ih = i * stride + ih_off
                    for j in range(j_lo, j_hi):
                        o[b, ch, i, j] = o[b, ch, i, j] + wv * x[b, ch, ih, j * stride + iw_off]
    return out


def im2col(const float[:, :, :, ::1] x, int kh, int kw, int stride, int pad, int dil):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oh = _out_extent(h, kh, stride, pad, dil)
    cdef Py_ssize_t ow = _out_extent(wd, kw, stride, pad, dil)
    cols = np.zeros((n, c * kh * kw, oh * ow), dtype=np.float32)
    cdef float[:, :, ::1] cv = cols
    cdef Py_ssize_t nc, b, ch, ki, kj, row, i, j, ih, ih_off, iw_off, i_lo, i_hi, j_lo, j_hi
    for nc in prange(n * c, nogil=True, num_threads=_nthreads, schedule="static"):
        b = nc // c
        ch = nc % c
        for ki in range(kh):
            ih_off = ki * dil - pad
            i_lo = _first_valid(ih_off, stride)
            i_hi = _end_valid(ih_off, stride, h, oh)
            for kj in range(kw):
                row = (ch * kh + ki) * kw + kj
                iw_off = kj * dil - pad
                j_lo = _first_valid(iw_off, stride)
                j_hi = _end_valid(iw_off, stride, wd, ow)
                for i in range(i_lo, i_hi):
                    ih = i * stride + ih_off
                    for j in range(j_lo, j_hi):
                        cv[b, row, i * ow + j] = x[b, ch, ih, j * stride + iw_off]
    return cols


def maxpool2(const float[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = wd // 2
    out = np.empty((n, c, oh, ow), dtype=np.float32)
    cdef float[:, :, :, ::1] o = out
    cdef Py_ssize_t nc, b, ch, i, j
    cdef float m, v
    for nc in prange(n * c, nogil=True, num_threads=_nthreads, schedule="static"):
        b = nc // c
        ch = nc % c
        for i in range(oh):
            for j in range(ow):
                m = x[b, ch, 2 * i, 2 * j]
                v = x[b, ch, 2 * i, 2 * j + 1]
                if v > m:
                    m = v
                v = x[b, ch, 2 * i + 1, 2 * j]
                if v > m:
                    m = v
                v = x[b, ch, 2 * i + 1, 2 * j + 1]
                if v > m:
                    m = v
                o[b, ch, i, j] = m
    return out


cdef void _coords(Py_ssize_t in_size, Py_ssize_t out_size, Py_ssize_t[::1] i0,
                  Py_ssize_t[::1] i1, double[::1] t):
    cdef double scale = <double>in_size / <double>out_size
    cdef double src
    cdef Py_ssize_t k, lo
    for k in range(out_size):
        src = (k + 0.5) * scale - 0.5
        if src < 0.0:
            src = 0.0
        if src > in_size - 1:
            src = in_size - 1
        lo = <Py_ssize_t>floor(src)
        i0[k] = lo
        i1[k] = lo + 1 if lo + 1 < in_size else in_size - 1
        t[k] = src - lo


def resize_bilinear(const float[:, :, :, ::1] x, int out_h, int out_w):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    out = np.empty((n, c, out_h, out_w), dtype=np.float32)
    cdef float[:, :, :, ::1] o = out
    y0a = np.empty(out_h, dtype=np.intp)
    y1a = np.empty(out_h, dtype=np.intp)
    tya = np.empty(out_h, dtype=np.float64)
    x0a = np.empty(out_w, dtype=np.intp)
    x1a = np.empty(out_w, dtype=np.intp)
    txa = np.empty(out_w, dtype=np.float64)
    cdef Py_ssize_t[::1] y0 = y0a, y1 = y1a, x0 = x0a, x1 = x1a
    cdef double[::1] ty = tya, tx = txa
    _coords(h, out_h, y0, y1, ty)
    _coords(wd, out_w, x0, x1, tx)
    cdef Py_ssize_t nc, b, ch, i, j
    cdef double top, bot, fx, fy
    for nc in prange(n * c, nogil=True, num_threads=_nthreads, schedule="static"):
        b = nc // c
        ch = nc % c
        for i in range(out_h):
            fy = ty[i]
            for j in range(out_w):
                fx = tx[j]
                top = (1.0 - fx) * x[b, ch, y0[i], x0[j]] + fx * x[b, ch, y0[i], x1[j]]
                bot = (1.0 - fx) * x[b, ch, y1[i], x0[j]] + fx * x[b, ch, y1[i], x1[j]]
                o[b, ch, i, j] = <float>((1.0 - fy) * top + fy * bot)
    return out
