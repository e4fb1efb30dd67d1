# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the routines in ``_kernels_py``.

Arithmetic order matches the numpy versions exactly; the test-suite
checks bit-identity between the two backends.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double PIVOT_EPS = 1e-12


cdef inline uint64_t _fmix(uint64_t z) nogil:
    z = z ^ (z >> 30)
    z = z * 0xBF58476D1CE4E5B9ULL
    z = z ^ (z >> 27)
    z = z * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t seed, uint64_t tid, int64_t h, int64_t slot) nogil:
    cdef uint64_t z = _fmix(seed + GOLDEN * (tid + 1))
    z = _fmix(z + GOLDEN * <uint64_t>(h * 8 + slot + 1))
    return <double>(z >> 11) * INV53


cdef inline int64_t _draw(double u, const double[:] cdf) nogil:
    cdef int64_t j, cnt = 0
    for j in range(cdf.shape[0]):
        if u >= cdf[j]:
            cnt += 1
    return cnt


def uniforms(seed, traj_ids, int64_t h, int64_t slot):
    cdef const int64_t[:] ids = np.ascontiguousarray(traj_ids, dtype=np.int64)
    cdef uint64_t s = <uint64_t>(int(seed) % 2**64)
    out = np.empty(ids.shape[0], dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i
    for i in range(ids.shape[0]):
        o[i] = _uniform(s, <uint64_t>ids[i], h, slot)
    return out


def sample_paths(seed, traj_ids, init_cdf, act_cdf, opp_cdf, trans_cdf):
    cdef const int64_t[:] ids = np.ascontiguousarray(traj_ids, dtype=np.int64)
    cdef const double[:] icdf = np.ascontiguousarray(init_cdf, dtype=np.float64)
    cdef const double[:, :, :] acdf = np.ascontiguousarray(act_cdf, dtype=np.float64)
    cdef const double[:, :, :] ocdf
    cdef const double[:, :, :, :] tcdf = np.ascontiguousarray(trans_cdf, dtype=np.float64)
    cdef bint has_opp = opp_cdf is not None
    cdef int64_t B = 1
    if has_opp:
        ocdf = np.ascontiguousarray(opp_cdf, dtype=np.float64)
        B = ocdf.shape[2]
    cdef uint64_t s = <uint64_t>(int(seed) % 2**64)
    cdef Py_ssize_t K = ids.shape[0]
    cdef Py_ssize_t H = acdf.shape[0]
    xs_a = np.zeros((K, H), dtype=np.int64)
    a_a = np.zeros((K, H), dtype=np.int64)
    b_a = np.zeros((K, H), dtype=np.int64)
    n_a = np.zeros((K, H), dtype=np.int64)
    cdef int64_t[:, :] xs = xs_a
    cdef int64_t[:, :] acts = a_a
    cdef int64_t[:, :] opps = b_a
    cdef int64_t[:, :] nxt = n_a
    cdef Py_ssize_t k, h
    cdef int64_t x, a, b
    cdef uint64_t tid
    for k in range(K):
        tid = <uint64_t>ids[k]
        x = _draw(_uniform(s, tid, 0, 0), icdf)
        for h in range(H):
            xs[k, h] = x
            a = _draw(_uniform(s, tid, h, 1), acdf[h, x])
            b = 0
            if has_opp:
                b = _draw(_uniform(s, tid, h, 2), ocdf[h, x])
            x = _draw(_uniform(s, tid, h, 3), tcdf[h, x, a * B + b])
            acts[k, h] = a
            opps[k, h] = b
            nxt[k, h] = x
    return xs_a, a_a, b_a, n_a


def gram_rhs(phi, y, w):
    cdef const double[:, :] P = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[:, :] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], d = P.shape[1], m = Y.shape[1]
    G_a = np.zeros((d, d))
    s_a = np.zeros((d, m))
    c_a = np.zeros((d, m))
    t_a = np.zeros(d)
    cdef double[:, :] G = G_a
    cdef double[:, :] S = s_a
    cdef double[:, :] C = c_a
    cdef double[:] t = t_a
    cdef Py_ssize_t i, j, k
    cdef double term, tot
    for i in range(n):
        for j in range(d):
            t[j] = W[i] * P[i, j]
        for j in range(d):
            for k in range(d):
                G[j, k] = G[j, k] + t[j] * P[i, k]
        for j in range(d):
            for k in range(m):
                term = t[j] * Y[i, k]
                tot = S[j, k] + term
                if fabs(S[j, k]) >= fabs(term):
                    C[j, k] = C[j, k] + ((S[j, k] - tot) + term)
                else:
                    C[j, k] = C[j, k] + ((term - tot) + S[j, k])
                S[j, k] = tot
    return G_a, s_a + c_a


def simplex_game(P_in):
    cdef const double[:, :] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef Py_ssize_t m = P.shape[0], n = P.shape[1]
    cdef Py_ssize_t width = n + m + 1
    T_a = np.zeros((m + 1, width))
    cdef double[:, :] T = T_a
    basis_a = np.arange(n, n + m, dtype=np.int64)
    cdef int64_t[:] basis = basis_a
    cdef Py_ssize_t i, j, k, col, row
    cdef double best, ratio, p, f
    cdef long pivots = 0
    cdef long limit = 50 * (n + m) + 1000
    for i in range(m):
        for j in range(n):
            T[i, j] = P[i, j]
        T[i, n + i] = 1.0
        T[i, width - 1] = 1.0
    for j in range(n):
        T[m, j] = -1.0
    while True:
        col = -1
        for j in range(n + m):
            if T[m, j] < -PIVOT_EPS:
                col = j
                break
        if col < 0:
            break
        row = -1
        best = 0.0
        for i in range(m):
            if T[i, col] > PIVOT_EPS:
                ratio = T[i, width - 1] / T[i, col]
                if row < 0 or ratio < best or (ratio == best and basis[i] < basis[row]):
                    row = i
                    best = ratio
        if row < 0:
            raise RuntimeError("unbounded game LP")
        p = T[row, col]
        for k in range(width):
            T[row, k] = T[row, k] / p
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    for k in range(width):
                        T[i, k] = T[i, k] - f * T[row, k]
        basis[row] = col
        pivots += 1
        if pivots > limit:
            raise RuntimeError("simplex pivot limit exceeded")
    z = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            z[basis[i]] = T[i, width - 1]
    dual = T_a[m, n:n + m].copy()
    return z, dual, pivots
