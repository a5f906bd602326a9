# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as the NumPy backend, but the redistribution kernels stream
over receptive fields directly instead of materializing the per-connection
contribution array, so memory stays O(input) regardless of layer size.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def conv2d_forward(const float[:, :, ::1] x, const float[:, :, :, ::1] w,
                   b, int stride, int pad):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    out_arr = np.empty((o, oh, ow), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr
    cdef const float[::1] bias
    cdef bint has_bias = b is not None
    if has_bias:
        bias = b
    cdef Py_ssize_t j, oy, ox, ci, u, v, iy, ix
    cdef double acc
    with nogil:
        for j in range(o):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for u in range(kh):
                            iy = oy * stride + u - pad
                            if iy < 0 or iy >= h:
                                continue
                            for v in range(kw):
                                ix = ox * stride + v - pad
                                if ix < 0 or ix >= wd:
                                    continue
                                acc += <double>w[j, ci, u, v] * <double>x[ci, iy, ix]
                    if has_bias:
                        acc += <double>bias[j]
                    out[j, oy, ox] = <float>acc
    return out_arr


def conv2d_split_sums(const float[:, :, ::1] x, const float[:, :, :, ::1] w,
                      int stride, int pad):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    splus_arr = np.zeros((o, oh, ow), dtype=np.float64)
    sminus_arr = np.zeros((o, oh, ow), dtype=np.float64)
    cdef double[:, :, ::1] splus = splus_arr
    cdef double[:, :, ::1] sminus = sminus_arr
    cdef Py_ssize_t j, oy, ox, ci, u, v, iy, ix
    cdef double z, sp, sn
    with nogil:
        for j in range(o):
            for oy in range(oh):
                for ox in range(ow):
                    sp = 0.0
                    sn = 0.0
                    for ci in range(c):
                        for u in range(kh):
                            iy = oy * stride + u - pad
                            if iy < 0 or iy >= h:
                                continue
                            for v in range(kw):
                                ix = ox * stride + v - pad
                                if ix < 0 or ix >= wd:
                                    continue
                                z = <double>w[j, ci, u, v] * <double>x[ci, iy, ix]
                                if z > 0.0:
                                    sp += z
                                elif z < 0.0:
                                    sn += z
                    splus[j, oy, ox] = sp
                    sminus[j, oy, ox] = sn
    return splus_arr, sminus_arr


def conv2d_redistribute(const float[:, :, ::1] x, const float[:, :, :, ::1] w,
                        int stride, int pad,
                        const double[:, :, ::1] pos_scale,
                        const double[:, :, ::1] neg_scale):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = pos_scale.shape[1], ow = pos_scale.shape[2]
    rpos_arr = np.zeros((c, h, wd), dtype=np.float64)
    rneg_arr = np.zeros((c, h, wd), dtype=np.float64)
    cdef double[:, :, ::1] rpos = rpos_arr
    cdef double[:, :, ::1] rneg = rneg_arr
    cdef Py_ssize_t j, oy, ox, ci, u, v, iy, ix
    cdef double z, ps, ns
    with nogil:
        for j in range(o):
            for oy in range(oh):
                for ox in range(ow):
                    ps = pos_scale[j, oy, ox]
                    ns = neg_scale[j, oy, ox]
                    if ps == 0.0 and ns == 0.0:
                        continue
                    for ci in range(c):
                        for u in range(kh):
                            iy = oy * stride + u - pad
                            if iy < 0 or iy >= h:
                                continue
                            for v in range(kw):
                                ix = ox * stride + v - pad
                                if ix < 0 or ix >= wd:
                                    continue
                                z = <double>w[j, ci, u, v] * <double>x[ci, iy, ix]
                                if z > 0.0:
                                    rpos[ci, iy, ix] += ps * z
                                elif z < 0.0:
                                    rneg[ci, iy, ix] += ns * z
    return rpos_arr, rneg_arr


def maxpool2d_forward(const float[:, :, ::1] x, int kernel, int stride):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t oh = (h - kernel) // stride + 1
    cdef Py_ssize_t ow = (wd - kernel) // stride + 1
    out_arr = np.empty((c, oh, ow), dtype=np.float32)
    arg_arr = np.empty((c, oh, ow), dtype=np.int64)
    cdef float[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] arg = arg_arr
    cdef Py_ssize_t ci, oy, ox, u, v, iy, ix, best_iy, best_ix
    cdef float best, val
    with nogil:
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    best = x[ci, oy * stride, ox * stride]
                    best_iy = oy * stride
                    best_ix = ox * stride
                    for u in range(kernel):
                        iy = oy * stride + u
                        for v in range(kernel):
                            ix = ox * stride + v
                            val = x[ci, iy, ix]
                            if val > best:
                                best = val
                                best_iy = iy
                                best_ix = ix
                    out[ci, oy, ox] = best
                    arg[ci, oy, ox] = (ci * h + best_iy) * wd + best_ix
    return out_arr, arg_arr


def sum_sequential(const float[::1] flat):
    cdef Py_ssize_t i, n = flat.shape[0]
    cdef double acc = 0.0
    with nogil:
        for i in range(n):
            acc += <double>flat[i]
    return acc
