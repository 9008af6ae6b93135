# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: block lattice metrics and scaled single-read BCJR."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64


def gamma_all(cws, y, int n, int d_lo, int D, int n_mu, weights):
    cdef double w_ins = weights[0], w_del = weights[1], w_match = weights[2], w_mis = weights[3]
    cdef i64[:, :, ::1] cw = np.ascontiguousarray(cws, dtype=np.int64)
    cdef i64[::1] yy = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t T = cw.shape[0], C = cw.shape[1]
    cdef Py_ssize_t Ny = yy.shape[0]
    out = np.zeros((T, C, D, n_mu))
    cdef double[:, :, :, ::1] G = out
    cdef double[::1] prev = np.zeros(n_mu)
    cdef double[::1] cur = np.zeros(n_mu)
    cdef Py_ssize_t t, c, j, r, l, L, st
    cdef double q
    cdef i64 xr
    for t in range(T):
        for j in range(D):
            st = t * n + d_lo + j
            if st < 0 or st > Ny:
                continue
            L = Ny - st
            if L > n_mu - 1:
                L = n_mu - 1
            for c in range(C):
                prev[0] = 1.0
                for l in range(1, L + 1):
                    prev[l] = prev[l - 1] * w_ins
                for r in range(1, n + 1):
                    xr = cw[t, c, r - 1]
                    cur[0] = w_del * prev[0]
                    for l in range(1, L + 1):
                        q = w_match if yy[st + l - 1] == xr else w_mis
                        cur[l] = w_del * prev[l] + q * prev[l - 1]
                        if r < n:
                            cur[l] += w_ins * cur[l - 1]
                    for l in range(L + 1):
                        prev[l] = cur[l]
                for l in range(L + 1):
                    G[t, c, j, l] = prev[l]
    return out


def forward_backward(G_, cw_, nxt_, prior_, int n, int d0, int end_s, int end_d):
    cdef double[:, :, :, ::1] G = np.ascontiguousarray(G_, dtype=np.float64)
    cdef i64[:, :, ::1] cw = np.ascontiguousarray(cw_, dtype=np.int64)
    cdef i64[:, ::1] nxt = np.ascontiguousarray(nxt_, dtype=np.int64)
    cdef double[:, ::1] prior = np.ascontiguousarray(prior_, dtype=np.float64)
    cdef Py_ssize_t T = G.shape[0], D = G.shape[2], dl = G.shape[3]
    cdef Py_ssize_t S = nxt.shape[0], A = nxt.shape[1]
    alpha_ = np.zeros((T + 1, S, D))
    cdef double[:, :, ::1] alpha = alpha_
    beta_ = np.zeros((2, S, D))
    cdef double[:, :, ::1] beta = beta_
    app_ = np.zeros((T, A))
    cdef double[:, ::1] app = app_
    cdef Py_ssize_t t, s, a, d, mu, dn, sn, c, cur, old
    cdef double pa, av, z, logf = 0.0, logb = 0.0, h, hs, pf
    alpha[0, 0, d0] = 1.0
    for t in range(T):
        z = 0.0
        for s in range(S):
            for a in range(A):
                pa = prior[t, a]
                if pa == 0.0:
                    continue
                c = cw[t, s, a]
                sn = nxt[s, a]
                for d in range(D):
                    av = alpha[t, s, d] * pa
                    if av == 0.0:
                        continue
                    for mu in range(dl):
                        dn = d + mu - n
                        if dn < 0 or dn >= D:
                            continue
                        alpha[t + 1, sn, dn] += av * G[t, c, d, mu]
        for s in range(S):
            for d in range(D):
                z += alpha[t + 1, s, d]
        if not z > 0.0:
            return np.full((T, A), 1.0 / A), -INFINITY, -INFINITY, False
        for s in range(S):
            for d in range(D):
                alpha[t + 1, s, d] /= z
        logf += log(z)
    pf = alpha[T, end_s, end_d]
    if not pf > 0.0:
        return np.full((T, A), 1.0 / A), -INFINITY, -INFINITY, False
    logf += log(pf)

    cur = 0
    beta[cur, end_s, end_d] = 1.0
    for t in range(T - 1, -1, -1):
        old = cur
        cur = 1 - cur
        for s in range(S):
            for d in range(D):
                beta[cur, s, d] = 0.0
        for s in range(S):
            for a in range(A):
                pa = prior[t, a]
                if pa == 0.0:
                    continue
                c = cw[t, s, a]
                sn = nxt[s, a]
                hs = 0.0
                for d in range(D):
                    h = 0.0
                    for mu in range(dl):
                        dn = d + mu - n
                        if dn < 0 or dn >= D:
                            continue
                        h += G[t, c, d, mu] * beta[old, sn, dn]
                    beta[cur, s, d] += pa * h
                    hs += alpha[t, s, d] * h
                app[t, a] += pa * hs
        z = 0.0
        for s in range(S):
            for d in range(D):
                z += beta[cur, s, d]
        if not z > 0.0:
            return np.full((T, A), 1.0 / A), -INFINITY, -INFINITY, False
        for s in range(S):
            for d in range(D):
                beta[cur, s, d] /= z
        logb += log(z)
    if beta[cur, 0, d0] > 0.0:
        logb += log(beta[cur, 0, d0])
    else:
        logb = -INFINITY
    return app_, logf, logb, True


def forward_only(G_, cw_, nxt_, prior_, int n, int d0, int end_s, int end_d):
    cdef double[:, :, :, ::1] G = np.ascontiguousarray(G_, dtype=np.float64)
    cdef i64[:, :, ::1] cw = np.ascontiguousarray(cw_, dtype=np.int64)
    cdef i64[:, ::1] nxt = np.ascontiguousarray(nxt_, dtype=np.int64)
    cdef double[:, ::1] prior = np.ascontiguousarray(prior_, dtype=np.float64)
    cdef Py_ssize_t T = G.shape[0], D = G.shape[2], dl = G.shape[3]
    cdef Py_ssize_t S = nxt.shape[0], A = nxt.shape[1]
    cdef double[:, :, ::1] buf = np.zeros((2, S, D))
    cdef Py_ssize_t t, s, a, d, mu, dn, sn, c, cur = 0, nw
    cdef double pa, av, z, logf = 0.0
    buf[0, 0, d0] = 1.0
    for t in range(T):
        nw = 1 - cur
        for s in range(S):
            for d in range(D):
                buf[nw, s, d] = 0.0
        for s in range(S):
            for a in range(A):
                pa = prior[t, a]
                if pa == 0.0:
                    continue
                c = cw[t, s, a]
                sn = nxt[s, a]
                for d in range(D):
                    av = buf[cur, s, d] * pa
                    if av == 0.0:
                        continue
                    for mu in range(dl):
                        dn = d + mu - n
                        if 0 <= dn < D:
                            buf[nw, sn, dn] += av * G[t, c, d, mu]
        z = 0.0
        for s in range(S):
            for d in range(D):
                z += buf[nw, s, d]
        if not z > 0.0:
            return -INFINITY
        for s in range(S):
            for d in range(D):
                buf[nw, s, d] /= z
        logf += log(z)
        cur = nw
    if buf[cur, end_s, end_d] > 0.0:
        return logf + log(buf[cur, end_s, end_d])
    return -INFINITY
