# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``."""
import numpy as np
cimport cython
from scipy.linalg.cython_blas cimport dgemm

NAME = "cython"


cdef inline void _gemm(char* ta, char* tb, int m, int n, int k,
                       const double* a, int lda, const double* b, int ldb,
                       double* c, int ldc) noexcept nogil:
    # column-major dgemm with alpha = beta = 1 (accumulate into c)
    cdef double one = 1.0
    dgemm(ta, tb, &m, &n, &k, &one, <double*>a, &lda, <double*>b, &ldb, &one, c, &ldc)


def conv1d_forward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                   const double[::1] b, Py_ssize_t dilation=1):
    """Per tap, out[b][:, lo:hi] += W_k @ x[b][:, lo+off:hi+off] via dgemm."""
    cdef Py_ssize_t B = x.shape[0], Ci = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t Co = w.shape[0], K = w.shape[2], half = K // 2
    cdef Py_ssize_t bi, o, k, n, off, lo, hi
    wk_arr = np.ascontiguousarray(np.transpose(w, (2, 0, 1)))
    cdef double[:, :, ::1] wk = wk_arr
    out_arr = np.empty((B, Co, L))
    cdef double[:, :, ::1] out = out_arr
    if B == 0 or L == 0:
        return out_arr
    with nogil:
        for bi in range(B):
            for o in range(Co):
                for n in range(L):
                    out[bi, o, n] = b[o]
            for k in range(K):
                off = (k - half) * dilation
                lo = -off if off < 0 else 0
                hi = L - off if off > 0 else L
                if lo >= hi:
                    continue
                _gemm(b"N", b"N", <int>(hi - lo), <int>Co, <int>Ci,
                      &x[bi, 0, lo + off], <int>L, &wk[k, 0, 0], <int>Ci,
                      &out[bi, 0, lo], <int>L)
    return out_arr


def conv1d_backward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                    const double[:, :, ::1] gout, Py_ssize_t dilation=1):
    cdef Py_ssize_t B = x.shape[0], Ci = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t Co = w.shape[0], K = w.shape[2], half = K // 2
    cdef Py_ssize_t bi, o, k, n, off, lo, hi
    cdef double acc
    wk_arr = np.ascontiguousarray(np.transpose(w, (2, 0, 1)))
    cdef double[:, :, ::1] wk = wk_arr
    gx_arr = np.zeros((B, Ci, L))
    gwk_arr = np.zeros((K, Co, Ci))
    gb_arr = np.zeros(Co)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gwk = gwk_arr
    cdef double[::1] gb = gb_arr
    if B > 0 and L > 0:
        with nogil:
            for bi in range(B):
                for o in range(Co):
                    acc = 0.0
                    for n in range(L):
                        acc += gout[bi, o, n]
                    gb[o] += acc
                for k in range(K):
                    off = (k - half) * dilation
                    lo = -off if off < 0 else 0
                    hi = L - off if off > 0 else L
                    if lo >= hi:
                        continue
                    # gx[b][:, lo+off:hi+off] += W_k^T @ gout[b][:, lo:hi]
                    _gemm(b"N", b"T", <int>(hi - lo), <int>Ci, <int>Co,
                          &gout[bi, 0, lo], <int>L, &wk[k, 0, 0], <int>Ci,
                          &gx[bi, 0, lo + off], <int>L)
                    # W_k grad += gout[b][:, lo:hi] @ x[b][:, lo+off:hi+off]^T
                    _gemm(b"T", b"N", <int>Ci, <int>Co, <int>(hi - lo),
                          &x[bi, 0, lo + off], <int>L, &gout[bi, 0, lo], <int>L,
                          &gwk[k, 0, 0], <int>Ci)
    return gx_arr, np.ascontiguousarray(np.transpose(gwk_arr, (1, 2, 0))), gb_arr


def dwt_analysis(const double[:, ::1] x, const double[::1] lo, const double[::1] hi):
    cdef Py_ssize_t R = x.shape[0], L = x.shape[1], M = L // 2, N = lo.shape[0]
    cdef Py_ssize_t r, m, k, j
    cdef double a, d
    cA_arr = np.empty((R, M))
    cD_arr = np.empty((R, M))
    cdef double[:, ::1] cA = cA_arr
    cdef double[:, ::1] cD = cD_arr
    for r in range(R):
        for m in range(M):
            a = 0.0
            d = 0.0
            for k in range(N):
                j = (2 * m - k) % L
                if j < 0:
                    j += L
                a += lo[k] * x[r, j]
                d += hi[k] * x[r, j]
            cA[r, m] = a
            cD[r, m] = d
    return cA_arr, cD_arr


def dwt_synthesis(const double[:, ::1] cA, const double[:, ::1] cD,
                  const double[::1] slo, const double[::1] shi):
    cdef Py_ssize_t R = cA.shape[0], M = cA.shape[1], L = 2 * M, N = slo.shape[0]
    cdef Py_ssize_t r, m, k, j
    out_arr = np.zeros((R, L))
    cdef double[:, ::1] out = out_arr
    for r in range(R):
        for m in range(M):
            for k in range(N):
                j = (2 * m + k - (N - 1)) % L
                if j < 0:
                    j += L
                out[r, j] += slo[k] * cA[r, m] + shi[k] * cD[r, m]
    return out_arr
