# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels; contract identical to `_fallback`."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv1d_forward(cnp.float64_t[:, :, ::1] x, cnp.float64_t[:, :, ::1] w,
                   cnp.float64_t[::1] b):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t pl = (K - 1) // 2
    cdef Py_ssize_t n, o, c, l, k, i
    cdef double acc
    y_arr = np.empty((B, O, L), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] y = y_arr
    with nogil:
        for n in range(B):
            for o in range(O):
                for l in range(L):
                    acc = b[o]
                    for c in range(C):
                        for k in range(K):
                            i = l + k - pl
                            if 0 <= i < L:
                                acc += x[n, c, i] * w[o, c, k]
                    y[n, o, l] = acc
    return y_arr


def conv1d_backward(cnp.float64_t[:, :, ::1] x, cnp.float64_t[:, :, ::1] w,
                    cnp.float64_t[:, :, ::1] gy):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t pl = (K - 1) // 2
    cdef Py_ssize_t n, o, c, l, k, i
    cdef double g
    gx_arr = np.zeros((B, C, L), dtype=np.float64)
    gw_arr = np.zeros((O, C, K), dtype=np.float64)
    gb_arr = np.zeros(O, dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] gx = gx_arr
    cdef cnp.float64_t[:, :, ::1] gw = gw_arr
    cdef cnp.float64_t[::1] gb = gb_arr
    with nogil:
        for n in range(B):
            for o in range(O):
                for l in range(L):
                    g = gy[n, o, l]
                    gb[o] += g
                    for c in range(C):
                        for k in range(K):
                            i = l + k - pl
                            if 0 <= i < L:
                                gw[o, c, k] += x[n, c, i] * g
                                gx[n, c, i] += w[o, c, k] * g
    return gx_arr, gw_arr, gb_arr


def conv2d_forward(cnp.float64_t[:, :, :, ::1] x, cnp.float64_t[:, :, :, ::1] w,
                   cnp.float64_t[::1] b):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t pt = (KH - 1) // 2, pl = (KW - 1) // 2
    cdef Py_ssize_t n, o, c, h, v, i, j, r, s
    cdef double acc
    y_arr = np.empty((B, O, H, W), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] y = y_arr
    with nogil:
        for n in range(B):
            for o in range(O):
                for h in range(H):
                    for v in range(W):
                        acc = b[o]
                        for c in range(C):
                            for i in range(KH):
                                r = h + i - pt
                                if r < 0 or r >= H:
                                    continue
                                for j in range(KW):
                                    s = v + j - pl
                                    if 0 <= s < W:
                                        acc += x[n, c, r, s] * w[o, c, i, j]
                        y[n, o, h, v] = acc
    return y_arr


def conv2d_backward(cnp.float64_t[:, :, :, ::1] x, cnp.float64_t[:, :, :, ::1] w,
                    cnp.float64_t[:, :, :, ::1] gy):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t pt = (KH - 1) // 2, pl = (KW - 1) // 2
    cdef Py_ssize_t n, o, c, h, v, i, j, r, s
    cdef double g
    gx_arr = np.zeros((B, C, H, W), dtype=np.float64)
    gw_arr = np.zeros((O, C, KH, KW), dtype=np.float64)
    gb_arr = np.zeros(O, dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] gx = gx_arr
    cdef cnp.float64_t[:, :, :, ::1] gw = gw_arr
    cdef cnp.float64_t[::1] gb = gb_arr
    with nogil:
        for n in range(B):
            for o in range(O):
                for h in range(H):
                    for v in range(W):
                        g = gy[n, o, h, v]
                        gb[o] += g
                        for c in range(C):
                            for i in range(KH):
                                r = h + i - pt
                                if r < 0 or r >= H:
                                    continue
                                for j in range(KW):
                                    s = v + j - pl
                                    if 0 <= s < W:
                                        gw[o, c, i, j] += x[n, c, r, s] * g
                                        gx[n, c, r, s] += w[o, c, i, j] * g
    return gx_arr, gw_arr, gb_arr
