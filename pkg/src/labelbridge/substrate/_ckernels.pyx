# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the recurrences in ``_pykernels``.

Signatures and return layouts match the numpy fallback exactly.  The GRU
recurrences hand whole-batch products to BLAS ``dgemm`` (the same library
numpy uses); the HMM recursion is small enough for plain loops.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, log
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sig(double v) nogil:
    if v >= 0:
        return 1.0 / (1.0 + exp(-v))
    cdef double e = exp(v)
    return e / (1.0 + e)


cdef inline void _mm(char ta, char tb, int m, int n, int k, double* a, int lda,
                     double* b, int ldb, double beta, double* c, int ldc) nogil:
    """Row-major C(m, n) = op(A) @ op(B) + beta * C through column-major dgemm."""
    cdef double one = 1.0
    dgemm(&tb, &ta, &n, &m, &k, &one, b, &ldb, a, &lda, &beta, c, &ldc)


def gru_forward(double[:, :, ::1] xp, double[:, ::1] u_r, double[:, ::1] u_u,
                double[:, ::1] u_c, h0):
    cdef Py_ssize_t B = xp.shape[0], T = xp.shape[1], H = xp.shape[2] // 3
    cdef Py_ssize_t b, t, j
    hs_a = np.empty((B, T, H))
    rs_a = np.empty((B, T, H))
    us_a = np.empty((B, T, H))
    cs_a = np.empty((B, T, H))
    hp_a = np.empty((B, T, H))
    if B == 0 or T == 0 or H == 0:
        return hs_a, (rs_a, us_a, cs_a, hp_a)
    uru_a = np.ascontiguousarray(np.concatenate([u_r, u_u], axis=1))
    cur_a = np.array(h0, dtype=np.float64, copy=True, order="C")
    acc_a = np.empty((B, 3 * H))
    rh_a = np.empty((B, H))
    cdef double[:, :, ::1] hs = hs_a, rs = rs_a, us = us_a, cs = cs_a, hp = hp_a
    cdef double[:, ::1] cur = cur_a, acc = acc_a, rh = rh_a, uru = uru_a
    cdef int h = <int>H, bb = <int>B
    cdef double u
    with nogil:
        for t in range(T):
            for b in range(B):
                for j in range(3 * H):
                    acc[b, j] = xp[b, t, j]
            # [r | u] pre-activations += h @ [U_r | U_u]
            _mm(b'N', b'N', bb, 2 * h, h, &cur[0, 0], h, &uru[0, 0], 2 * h, 1.0, &acc[0, 0], 3 * h)
            for b in range(B):
                for j in range(H):
                    hp[b, t, j] = cur[b, j]
                    rs[b, t, j] = _sig(acc[b, j])
                    us[b, t, j] = _sig(acc[b, H + j])
                    rh[b, j] = rs[b, t, j] * cur[b, j]
            _mm(b'N', b'N', bb, h, h, &rh[0, 0], h, &u_c[0, 0], h, 1.0, &acc[0, 2 * H], 3 * h)
            for b in range(B):
                for j in range(H):
                    cs[b, t, j] = tanh(acc[b, 2 * H + j])
                    u = us[b, t, j]
                    cur[b, j] = u * cur[b, j] + (1.0 - u) * cs[b, t, j]
                    hs[b, t, j] = cur[b, j]
    return hs_a, (rs_a, us_a, cs_a, hp_a)


def gru_backward(double[:, :, ::1] dhs, cache, double[:, ::1] u_r,
                 double[:, ::1] u_u, double[:, ::1] u_c):
    cdef double[:, :, ::1] rs = np.ascontiguousarray(cache[0])
    cdef double[:, :, ::1] us = np.ascontiguousarray(cache[1])
    cdef double[:, :, ::1] cs = np.ascontiguousarray(cache[2])
    cdef double[:, :, ::1] hp = np.ascontiguousarray(cache[3])
    cdef Py_ssize_t B = dhs.shape[0], T = dhs.shape[1], H = dhs.shape[2]
    cdef Py_ssize_t b, t, j
    dxp_a = np.zeros((B, T, 3 * H))
    duru_a = np.zeros((H, 2 * H))
    duc_a = np.zeros((H, H))
    dnext_a = np.zeros((B, H))
    if B == 0 or T == 0 or H == 0:
        return dxp_a, duru_a[:, :H].copy(), duru_a[:, H:].copy(), duc_a, dnext_a
    uru_a = np.ascontiguousarray(np.concatenate([u_r, u_u], axis=1))
    dh_a = np.empty((B, H))
    drh_a = np.empty((B, H))
    rhp_a = np.empty((B, H))
    hpt_a = np.empty((B, H))
    dg_a = np.empty((B, 3 * H))
    cdef double[:, :, ::1] dxp = dxp_a
    cdef double[:, ::1] duru = duru_a, duc = duc_a, dnext = dnext_a, uru = uru_a
    cdef double[:, ::1] dh = dh_a, drh = drh_a, rhp = rhp_a, hpt = hpt_a, dg = dg_a
    cdef int h = <int>H, bb = <int>B
    cdef double r, u, c
    with nogil:
        for t in range(T - 1, -1, -1):
            for b in range(B):
                for j in range(H):
                    dh[b, j] = dhs[b, t, j] + dnext[b, j]
                    u = us[b, t, j]
                    c = cs[b, t, j]
                    r = rs[b, t, j]
                    dg[b, H + j] = dh[b, j] * (hp[b, t, j] - c) * u * (1.0 - u)
                    dg[b, 2 * H + j] = dh[b, j] * (1.0 - u) * (1.0 - c * c)
                    rhp[b, j] = r * hp[b, t, j]
                    hpt[b, j] = hp[b, t, j]
            # drh = dac @ U_c^T ; dU_c += (r*h)^T @ dac
            _mm(b'N', b'T', bb, h, h, &dg[0, 2 * H], 3 * h, &u_c[0, 0], h, 0.0, &drh[0, 0], h)
            _mm(b'T', b'N', h, h, bb, &rhp[0, 0], h, &dg[0, 2 * H], 3 * h, 1.0, &duc[0, 0], h)
            for b in range(B):
                for j in range(H):
                    r = rs[b, t, j]
                    dg[b, j] = drh[b, j] * hp[b, t, j] * r * (1.0 - r)
                    dnext[b, j] = dh[b, j] * us[b, t, j] + drh[b, j] * r
                for j in range(3 * H):
                    dxp[b, t, j] = dg[b, j]
            # dnext += [dar | dau] @ [U_r | U_u]^T ; d[U_r | U_u] += h^T @ [dar | dau]
            _mm(b'N', b'T', bb, h, 2 * h, &dg[0, 0], 3 * h, &uru[0, 0], 2 * h, 1.0, &dnext[0, 0], h)
            _mm(b'T', b'N', h, 2 * h, bb, &hpt[0, 0], h, &dg[0, 0], 3 * h, 1.0, &duru[0, 0], 2 * h)
    return dxp_a, duru_a[:, :H].copy(), duru_a[:, H:].copy(), duc_a, dnext_a


def hmm_posteriors(double[:, :, ::1] lik, double[::1] start, double[:, ::1] trans):
    cdef Py_ssize_t N = lik.shape[0], T = lik.shape[1], L = lik.shape[2]
    cdef Py_ssize_t n, t, i, j
    alpha_a = np.empty((N, T, L))
    post_a = np.empty((N, T, L))
    ll_a = np.zeros(N)
    scale_a = np.empty(T)
    beta_a = np.empty(L)
    nb_a = np.empty(L)
    cdef double[:, :, ::1] alpha = alpha_a, post = post_a
    cdef double[::1] ll = ll_a, scale = scale_a, beta = beta_a, nb = nb_a
    cdef double s, acc
    with nogil:
        for n in range(N):
            s = 0.0
            for i in range(L):
                alpha[n, 0, i] = start[i] * lik[n, 0, i]
                s = s + alpha[n, 0, i]
            for i in range(L):
                alpha[n, 0, i] = alpha[n, 0, i] / s
            scale[0] = s
            for t in range(1, T):
                s = 0.0
                for j in range(L):
                    acc = 0.0
                    for i in range(L):
                        acc = acc + alpha[n, t - 1, i] * trans[i, j]
                    alpha[n, t, j] = acc * lik[n, t, j]
                    s = s + alpha[n, t, j]
                for j in range(L):
                    alpha[n, t, j] = alpha[n, t, j] / s
                scale[t] = s
            for t in range(T):
                ll[n] = ll[n] + log(scale[t])
            for i in range(L):
                beta[i] = 1.0
                post[n, T - 1, i] = alpha[n, T - 1, i]
            for t in range(T - 2, -1, -1):
                for i in range(L):
                    acc = 0.0
                    for j in range(L):
                        acc = acc + trans[i, j] * lik[n, t + 1, j] * beta[j]
                    nb[i] = acc / scale[t + 1]
                s = 0.0
                for i in range(L):
                    beta[i] = nb[i]
                    post[n, t, i] = alpha[n, t, i] * beta[i]
                    s = s + post[n, t, i]
                for i in range(L):
                    post[n, t, i] = post[n, t, i] / s
    return post_a, ll_a
