# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: one tracker round, decoder support scan, sanity residuals.

Signatures and results match ``dsst._fallback``. Neighbor sums run in
ascending neighbor id, the order stored in the graph's CSR arrays.
"""
import numpy as np

from libc.math cimport sqrt


cdef void _laplacian(const double[:, ::1] X, const Py_ssize_t[::1] indptr,
                     const Py_ssize_t[::1] indices, const double[::1] weights,
                     double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t p = X.shape[0], m = X.shape[1]
    cdef Py_ssize_t i, k, r, j
    cdef double w
    for i in range(p):
        for r in range(m):
            out[i, r] = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            w = weights[k]
            for r in range(m):
                out[i, r] += w * (X[i, r] - X[j, r])


cdef void _blockmul(const double[:, ::1] Ahat, const double[:, ::1] X, Py_ssize_t i,
                    double[::1] out) noexcept nogil:
    # out = (I_v kron Ahat) X[i]
    cdef Py_ssize_t n = Ahat.shape[0], m = X.shape[1]
    cdef Py_ssize_t base, r, c
    cdef double acc
    base = 0
    while base < m:
        for r in range(n):
            acc = 0.0
            for c in range(n):
                acc += Ahat[r, c] * X[i, base + c]
            out[base + r] = acc
        base += n


def laplacian_apply(const double[:, ::1] X, const Py_ssize_t[::1] indptr,
                    const Py_ssize_t[::1] indices, const double[::1] weights):
    out = np.empty((X.shape[0], X.shape[1]))
    cdef double[:, ::1] o = out
    with nogil:
        _laplacian(X, indptr, indices, weights, o)
    return out


def tracker_round(const double[:, ::1] W, const double[:, ::1] b, const double[:, ::1] eta,
                  const double[:, ::1] phi, const double[:, ::1] Ahat,
                  const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                  const double[::1] weights, double k_I, double k_P):
    cdef Py_ssize_t p = W.shape[0], m = W.shape[1]
    cdef Py_ssize_t i, r
    W1 = np.empty((p, m))
    b1 = np.empty((p, m))
    eta1 = np.empty((p, m))
    LW_arr = np.empty((p, m))
    Leta_arr = np.empty((p, m))
    tmp_arr = np.empty(m)
    cdef double[:, ::1] w1 = W1, bb1 = b1, e1 = eta1, LW = LW_arr, Leta = Leta_arr
    cdef double[::1] tmp = tmp_arr
    with nogil:
        _laplacian(W, indptr, indices, weights, LW)
        _laplacian(eta, indptr, indices, weights, Leta)
        for i in range(p):
            _blockmul(Ahat, W, i, tmp)
            for r in range(m):
                w1[i, r] = tmp[r] - W[i, r] + phi[i, r] - 2.0 * k_I * Leta[i, r]
            _blockmul(Ahat, b, i, tmp)
            for r in range(m):
                bb1[i, r] = tmp[r] + k_I * LW[i, r]
        _laplacian(w1, indptr, indices, weights, LW)
        for i in range(p):
            for r in range(m):
                e1[i, r] = k_P * bb1[i, r] + k_I * LW[i, r]
    return W1, b1, eta1


def support_residuals(const double[:, :, ::1] R, const double[:, ::1] Y):
    """``out[a, k] = || R[k] @ Y[a] ||_2``."""
    cdef Py_ssize_t nK = R.shape[0], m = R.shape[1], q = Y.shape[0]
    cdef Py_ssize_t a, k, r, c
    cdef double acc, tot
    out = np.empty((q, nK))
    cdef double[:, ::1] o = out
    with nogil:
        for a in range(q):
            for k in range(nK):
                tot = 0.0
                for r in range(m):
                    acc = 0.0
                    for c in range(m):
                        acc += R[k, r, c] * Y[a, c]
                    tot += acc * acc
                o[a, k] = sqrt(tot)
    return out


def sanity_residuals(const double[:, ::1] Zprev, const double[:, ::1] Znext,
                     const double[:, ::1] Ahat):
    """Per-row ``|| Znext[i] - Ahat @ Zprev[i] ||_2``."""
    cdef Py_ssize_t p = Zprev.shape[0], n = Zprev.shape[1]
    cdef Py_ssize_t i, r, c
    cdef double acc, tot
    out = np.empty(p)
    cdef double[::1] o = out
    with nogil:
        for i in range(p):
            tot = 0.0
            for r in range(n):
                acc = 0.0
                for c in range(n):
                    acc += Ahat[r, c] * Zprev[i, c]
                acc = Znext[i, r] - acc
                tot += acc * acc
            o[i] = sqrt(tot)
    return out
