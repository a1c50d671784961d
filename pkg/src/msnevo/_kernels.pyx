# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled hot-loop kernels. Mirrors msnevo._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def canberra(double[::1] x, double[::1] y):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double acc = 0.0
    cdef double num, den
    with nogil:
        for i in range(n):
            num = fabs(x[i] - y[i])
            den = fabs(x[i]) + fabs(y[i])
            if den > 0.0:
                acc += num / den
    return acc


def conv2d_forward(object x, object w, object b, int stride, int padding):
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    return _conv2d_valid(np.ascontiguousarray(x), np.ascontiguousarray(w),
                         np.ascontiguousarray(b), stride)


def _conv2d_valid(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                  double[::1] b, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1
    cdef Py_ssize_t wo = (wd - kw) // stride + 1
    out_arr = np.empty((n, o, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, oc, ic, oi, oj, ki, kj, bi
    cdef double wv, bias
    # weight scalar hoisted out of the innermost loop, which then runs over
    # contiguous output memory (and stride-1 input when stride == 1) so the
    # C compiler can vectorize it
    with nogil:
        for i in range(n):
            for oc in range(o):
                bias = b[oc]
                for oi in range(ho):
                    for oj in range(wo):
                        out[i, oc, oi, oj] = bias
                for ic in range(c):
                    for ki in range(kh):
                        for kj in range(kw):
                            wv = w[oc, ic, ki, kj]
                            for oi in range(ho):
                                bi = oi * stride + ki
                                if stride == 1:
                                    for oj in range(wo):
                                        out[i, oc, oi, oj] += wv * x[i, ic, bi, oj + kj]
                                else:
                                    for oj in range(wo):
                                        out[i, oc, oi, oj] += wv * x[i, ic, bi, oj * stride + kj]
    return out_arr


def maxpool2d_forward(object x_obj, int window, int stride):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_obj)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t ho = (h - window) // stride + 1
    cdef Py_ssize_t wo = (wd - window) // stride + 1
    out_arr = np.empty((n, c, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, ic, oi, oj, ki, kj, bi, bj
    cdef double best, v
    with nogil:
        for i in range(n):
            for ic in range(c):
                for oi in range(ho):
                    for oj in range(wo):
                        bi = oi * stride
                        bj = oj * stride
                        best = x[i, ic, bi, bj]
                        for ki in range(window):
                            for kj in range(window):
                                v = x[i, ic, bi + ki, bj + kj]
                                if v > best:
                                    best = v
                        out[i, ic, oi, oj] = best
    return out_arr
