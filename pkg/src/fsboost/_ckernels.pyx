# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels: im2col/col2im loops plus BLAS dgemm.

Same contract as ``_pykernels``: float64 C-contiguous inputs, float64 outputs.
"""
import numpy as np

from scipy.linalg.cython_blas cimport dgemm

BACKEND = "cython"


cdef void _gemm(bint trans_a, bint trans_b, int m, int n, int k,
                double *a, int lda, double *b, int ldb,
                double *c, int ldc, double beta) noexcept nogil:
    # Row-major C = op(A) @ op(B) expressed as column-major C^T = op(B)^T op(A)^T.
    cdef char ta = b'T' if trans_a else b'N'
    cdef char tb = b'T' if trans_b else b'N'
    cdef double alpha = 1.0
    dgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef void _im2col(const double[:, :, ::1] x, int k, int pad,
                  double[:, ::1] cols) noexcept nogil:
    cdef Py_ssize_t c_in = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t i, dy, dx, y, xx, sy, sx, row
    for i in range(c_in):
        for dy in range(k):
            for dx in range(k):
                row = (i * k + dy) * k + dx
                for y in range(h):
                    sy = y + dy - pad
                    if sy < 0 or sy >= h:
                        for xx in range(w):
                            cols[row, y * w + xx] = 0.0
                        continue
                    for xx in range(w):
                        sx = xx + dx - pad
                        if sx < 0 or sx >= w:
                            cols[row, y * w + xx] = 0.0
                        else:
                            cols[row, y * w + xx] = x[i, sy, sx]


cdef void _col2im(const double[:, ::1] cols, int k, int pad,
                  double[:, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t c_in = out.shape[0], h = out.shape[1], w = out.shape[2]
    cdef Py_ssize_t i, dy, dx, y, xx, sy, sx, row
    for i in range(c_in):
        for dy in range(k):
            for dx in range(k):
                row = (i * k + dy) * k + dx
                for y in range(h):
                    sy = y + dy - pad
                    if sy < 0 or sy >= h:
                        continue
                    for xx in range(w):
                        sx = xx + dx - pad
                        if sx >= 0 and sx < w:
                            out[i, sy, sx] += cols[row, y * w + xx]


def conv2d(x, weight, bias, int pad):
    cdef const double[:, :, ::1] xv = x
    cdef const double[::1] bv = bias
    cdef int c_out = weight.shape[0], c_in = weight.shape[1], k = weight.shape[2]
    cdef int h = x.shape[1], w = x.shape[2]
    cdef int p = h * w, ck = c_in * k * k
    wt = np.ascontiguousarray(weight).reshape(c_out, ck)
    cdef double[:, ::1] wv = wt
    out = np.empty((c_out, h, w))
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t o, j
    for o in range(c_out):
        for j in range(p):
            ov[o, j // w, j % w] = bv[o]
    if k == 1 and pad == 0:
        with nogil:
            _gemm(False, False, c_out, p, ck, &wv[0, 0], ck,
                  <double *>&xv[0, 0, 0], p, &ov[0, 0, 0], p, 1.0)
        return out
    cols = np.empty((ck, p))
    cdef double[:, ::1] cv = cols
    with nogil:
        _im2col(xv, k, pad, cv)
        _gemm(False, False, c_out, p, ck, &wv[0, 0], ck, &cv[0, 0], p,
              &ov[0, 0, 0], p, 1.0)
    return out


def conv2d_backward(x, weight, grad_out, int pad, bint need_input=True):
    cdef const double[:, :, ::1] xv = x
    cdef const double[:, :, ::1] gv = grad_out
    cdef int c_out = weight.shape[0], c_in = weight.shape[1], k = weight.shape[2]
    cdef int h = x.shape[1], w = x.shape[2]
    cdef int p = h * w, ck = c_in * k * k
    wt = np.ascontiguousarray(weight).reshape(c_out, ck)
    cdef double[:, ::1] wv = wt
    grad_w = np.empty((c_out, ck))
    cdef double[:, ::1] gwv = grad_w
    grad_b = np.asarray(grad_out).reshape(c_out, p).sum(axis=1)
    cdef double *colp
    cdef double[:, ::1] cv
    if k == 1 and pad == 0:
        colp = <double *>&xv[0, 0, 0]
    else:
        cols = np.empty((ck, p))
        cv = cols
        with nogil:
            _im2col(xv, k, pad, cv)
        colp = &cv[0, 0]
    with nogil:
        # grad_w = g @ cols^T
        _gemm(False, True, c_out, ck, p, <double *>&gv[0, 0, 0], p, colp, p,
              &gwv[0, 0], ck, 0.0)
    grad_w = grad_w.reshape(weight.shape)
    if not need_input:
        return None, grad_w, grad_b
    dcols = np.empty((ck, p))
    cdef double[:, ::1] dcv = dcols
    grad_x = np.zeros((c_in, h, w))
    cdef double[:, :, ::1] gxv = grad_x
    with nogil:
        # dcols = W^T @ g
        _gemm(True, False, ck, p, c_out, &wv[0, 0], ck, <double *>&gv[0, 0, 0], p,
              &dcv[0, 0], p, 0.0)
    if k == 1 and pad == 0:
        return dcols.reshape(c_in, h, w), grad_w, grad_b
    with nogil:
        _col2im(dcv, k, pad, gxv)
    return grad_x, grad_w, grad_b
