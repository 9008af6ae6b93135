"""Pure numpy versions of the hot kernels (same signatures as ``_kernels``)."""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def gamma_all(cws, y, n, d_lo, D, n_mu, weights):
    """Block branch metrics for every section, codeword and starting drift.

    ``cws`` is (T, C, n). Returns ``G`` of shape (T, C, D, n_mu) where
    ``G[t, c, j, mu]`` is the probability that codeword ``c`` of section ``t``
    produces exactly ``y[s : s + mu]`` with ``s = t*n + d_lo + j``.
    """
    w_ins, w_del, w_match, w_mis = weights
    cws = np.asarray(cws, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    T, C, _ = cws.shape
    Ny = y.size
    starts = (np.arange(T) * n)[:, None] + d_lo + np.arange(D)[None, :]  # (T, D)
    avail = Ny - starts  # symbols left after the start
    valid = (starts >= 0) & (avail >= 0)
    # ywin[t, j, l] = y[start + l], -1 outside the read
    L = n_mu - 1
    idx = starts[:, :, None] + np.arange(max(L, 1))[None, None, :]
    idx = np.where((idx >= 0) & (idx < Ny), idx, Ny)
    ywin = np.append(y, -1)[idx]
    lmask = (np.arange(n_mu)[None, None, :] <= avail[:, :, None]) & valid[:, :, None]
    lmask = lmask[:, None, :, :]  # (T, 1, D, n_mu)

    F = np.zeros((T, C, D, n_mu))
    F[..., 0] = 1.0
    for l in range(1, n_mu):
        F[..., l] = F[..., l - 1] * w_ins
    F *= lmask
    for r in range(1, n + 1):
        xr = cws[:, :, r - 1][:, :, None, None]  # (T, C, 1, 1)
        Q = np.where(ywin[:, None, :, :L] == xr, w_match, w_mis)  # (T, C, D, L)
        Fn = w_del * F
        Fn[..., 1:] += Q * F[..., :-1]
        if r < n:
            for l in range(1, n_mu):
                Fn[..., l] += w_ins * Fn[..., l - 1]
        F = Fn * lmask
    return F


def _transfer_index(S, A, nxt):
    P = np.zeros((S, A, S))
    P[np.arange(S)[:, None], np.arange(A)[None, :], nxt] = 1.0
    return P


def forward_backward(G, cw, nxt, prior, n, d0, end_s, end_d):
    """Scaled BCJR over (state, drift).

    Returns ``(app, log_py_forward, log_py_backward, ok)``; ``app`` rows are
    unnormalised. ``ok`` is False when the observation has zero probability
    under the truncated trellis.
    """
    T, C, D, dl = G.shape
    S, A = nxt.shape
    P = _transfer_index(S, A, nxt)
    alpha = np.zeros((T + 1, S, D))
    alpha[0, 0, d0] = 1.0
    logf = 0.0
    for t in range(T):
        g = G[t][cw[t]]  # (S, A, D, dl)
        X = alpha[t][:, None, :, None] * prior[t][None, :, None, None] * g
        Y = np.einsum("sadm,sak->kdm", X, P)
        new = np.zeros((S, D))
        for mu in range(dl):
            sh = mu - n
            lo, hi = max(0, -sh), min(D, D - sh)
            if lo < hi:
                new[:, lo + sh : hi + sh] += Y[:, lo:hi, mu]
        z = new.sum()
        if not z > 0:
            return np.full((T, A), 1.0 / A), -math.inf, -math.inf, False
        alpha[t + 1] = new / z
        logf += math.log(z)
    pf = alpha[T, end_s, end_d]
    if not pf > 0:
        return np.full((T, A), 1.0 / A), -math.inf, -math.inf, False
    log_f = logf + math.log(pf)

    beta = np.zeros((S, D))
    beta[end_s, end_d] = 1.0
    logb = 0.0
    app = np.zeros((T, A))
    for t in range(T - 1, -1, -1):
        pad = np.zeros((S, D + dl - 1))
        pad[:, n : n + D] = beta
        Bsh = sliding_window_view(pad, dl, axis=1)  # (S, D, dl): beta[s', d + mu - n]
        H = (G[t][cw[t]] * Bsh[nxt]).sum(axis=3)  # (S, A, D)
        app[t] = prior[t] * np.einsum("sd,sad->a", alpha[t], H)
        new = np.einsum("a,sad->sd", prior[t], H)
        z = new.sum()
        if not z > 0:
            return np.full((T, A), 1.0 / A), -math.inf, -math.inf, False
        beta = new / z
        logb += math.log(z)
    log_b = logb + math.log(beta[0, d0]) if beta[0, d0] > 0 else -math.inf
    return app, log_f, log_b, True


def forward_only(G, cw, nxt, prior, n, d0, end_s, end_d):
    """Scaled forward pass; returns log p(y) (``-inf`` when impossible)."""
    T, C, D, dl = G.shape
    S, A = nxt.shape
    P = _transfer_index(S, A, nxt)
    alpha = np.zeros((S, D))
    alpha[0, d0] = 1.0
    logf = 0.0
    for t in range(T):
        X = alpha[:, None, :, None] * prior[t][None, :, None, None] * G[t][cw[t]]
        Y = np.einsum("sadm,sak->kdm", X, P)
        new = np.zeros((S, D))
        for mu in range(dl):
            sh = mu - n
            lo, hi = max(0, -sh), min(D, D - sh)
            if lo < hi:
                new[:, lo + sh : hi + sh] += Y[:, lo:hi, mu]
        z = new.sum()
        if not z > 0:
            return -math.inf
        alpha = new / z
        logf += math.log(z)
    pf = alpha[end_s, end_d]
    return logf + math.log(pf) if pf > 0 else -math.inf
