"""Multi-read inference: exact joint BCJR, separate decoding with APP combination,
and edge-count complexity accounting."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, ReadSet
from .inner import InnerCode
from .trellis import (
    I_MAX_DEFAULT,
    DriftBounds,
    TrellisResult,
    bounds_for,
    count_edges,
    decode_single,
    prepare_priors,
    section_metrics,
    section_tables,
)

STATE_BUDGET = 10**7


class CapacityError(RuntimeError):
    """The joint trellis would exceed the configured state budget."""


def _reads(reads) -> list[np.ndarray]:
    if isinstance(reads, ReadSet):
        return [np.asarray(r, dtype=np.int64) for r in reads.reads]
    return [np.asarray(r, dtype=np.int64) for r in reads]


def dense_transfer(Gt: np.ndarray, n: int) -> np.ndarray:
    """Turn banded metrics ``(C, D, delta)`` into drift transfer matrices ``(C, D, D)``."""
    C, D, dl = Gt.shape
    out = np.zeros((C, D, D))
    d = np.arange(D)
    for mu in range(dl):
        dn = d + mu - n
        ok = (dn >= 0) & (dn < D)
        out[:, d[ok], dn[ok]] = Gt[:, ok, mu]
    return out


def _contract(X: np.ndarray, mats, transpose: bool) -> np.ndarray:
    """Apply one drift transfer matrix per read axis of ``X``."""
    for j, Mj in enumerate(mats):
        X = np.moveaxis(np.tensordot(X, Mj.T if transpose else Mj, axes=([j], [0])), -1, j)
    return X


def check_budget(bounds: DriftBounds, M: int, budget: float = STATE_BUDGET) -> None:
    size = float(bounds.Delta * bounds.delta) ** M
    if size > budget:
        raise CapacityError(
            f"joint trellis needs (Delta*delta)^M = {size:.3g} > budget {budget:.3g} "
            f"(Delta={bounds.Delta}, delta={bounds.delta}, M={M})"
        )


def _joint_forward(Gs, idx, nxt, prior, n, b, drifts, keep):
    """Scaled forward pass over (state, drift vector).

    Returns ``(alphas, log p(y))`` (all sections when ``keep``, else the last
    one), or ``None`` when the reads have zero probability.
    """
    T, A = prior.shape
    S = nxt.shape[0]
    M = len(Gs)
    shape = (S,) + (b.Delta,) * M
    alpha = np.zeros((T + 1,) + shape) if keep else None
    cur = np.zeros(shape)
    cur[(0,) + (-b.d_min,) * M] = 1.0
    if keep:
        alpha[0] = cur
    logf = 0.0
    for t in range(T):
        mats = [dense_transfer(G[t], n) for G in Gs]
        new = np.zeros(shape)
        for s in range(S):
            if not cur[s].any():
                continue
            for a in range(A):
                pa = prior[t, a]
                if pa == 0:
                    continue
                c = idx[t, s, a]
                new[nxt[s, a]] += pa * _contract(cur[s], [m[c] for m in mats], False)
        z = new.sum()
        if not z > 0:
            return None
        cur = new / z
        if keep:
            alpha[t + 1] = cur
        logf += math.log(z)
    end = (0,) + tuple(d - b.d_min for d in drifts)
    if not cur[end] > 0:
        return None
    return (alpha if keep else cur), logf + math.log(cur[end])


def joint_log_likelihood(
    reads,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
    state_budget: float = STATE_BUDGET,
):
    """``log p(y_1, ..., y_M)`` under ``priors``; ``None`` if out of bounds or impossible."""
    ys = _reads(reads)
    N = code.channel_length(N_o)
    drifts = [y.size - N for y in ys]
    b = bounds_for(drifts, N, params, code.n, I_max, bounds)
    if b is None:
        return None
    check_budget(b, len(ys), state_budget)
    prior = prepare_priors(code, N_o, priors)
    Gs = [section_metrics(y, code, N_o, params, b) for y in ys]
    _, idx = section_tables(code, N_o)
    out = _joint_forward(Gs, idx, code.next_state, prior, code.n, b, drifts, keep=False)
    return None if out is None else out[1]


def decode_joint(
    reads,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
    state_budget: float = STATE_BUDGET,
) -> TrellisResult:
    """Exact APPs ``p(w_i | y_1, ..., y_M)`` over the joint (state, drift vector) trellis."""
    ys = _reads(reads)
    M = len(ys)
    if M < 1:
        raise ValueError("need at least one read")
    N = code.channel_length(N_o)
    drifts = [y.size - N for y in ys]
    b = bounds_for(drifts, N, params, code.n, I_max, bounds)
    T, A, S = code.n_sections(N_o), code.A, code.n_states
    if b is None:
        return TrellisResult(np.full((T, A), 1.0 / A), -math.inf, -math.inf, True, bounds)
    check_budget(b, M, state_budget)
    prior = prepare_priors(code, N_o, priors)
    Gs = [section_metrics(y, code, N_o, params, b) for y in ys]
    _, idx = section_tables(code, N_o)
    nxt = code.next_state
    D = b.Delta
    shape = (S,) + (D,) * M
    edges = int(code.input_mask(N_o).sum()) * S * (D * b.delta) ** M

    erased = TrellisResult(np.full((T, A), 1.0 / A), -math.inf, -math.inf, True, b, edges)
    fwd = _joint_forward(Gs, idx, nxt, prior, code.n, b, drifts, keep=True)
    if fwd is None:
        return erased
    alpha, logf = fwd
    end = (0,) + tuple(d - b.d_min for d in drifts)

    beta = np.zeros(shape)
    beta[end] = 1.0
    logb = 0.0
    app = np.zeros((T, A))
    for t in range(T - 1, -1, -1):
        mats = [dense_transfer(G[t], code.n) for G in Gs]
        new = np.zeros(shape)
        for s in range(S):
            for a in range(A):
                pa = prior[t, a]
                if pa == 0:
                    continue
                c = idx[t, s, a]
                H = _contract(beta[nxt[s, a]], [m[c] for m in mats], True)
                app[t, a] += pa * float(np.vdot(alpha[t, s], H))
                new[s] += pa * H
        z = new.sum()
        if not z > 0:
            return erased
        beta = new / z
        logb += math.log(z)
    start = (0,) + (-b.d_min,) * M
    logb += math.log(beta[start]) if beta[start] > 0 else -math.inf
    app /= app.sum(axis=1, keepdims=True)
    return TrellisResult(app, logf, logb, False, b, edges)


def decode_joint_reference(
    reads,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
) -> TrellisResult:
    """Plain-loop joint BCJR that visits every trellis edge explicitly.

    Slow; meant for cross-checks and for counting edges on tiny instances.
    ``edges`` counts every enumerated (state, input, drift vector, segment
    length vector) combination, including those that leave the drift window.
    """
    ys = _reads(reads)
    M = len(ys)
    N = code.channel_length(N_o)
    drifts = [y.size - N for y in ys]
    b = bounds_for(drifts, N, params, code.n, I_max, bounds)
    T, A, S = code.n_sections(N_o), code.A, code.n_states
    if b is None:
        return TrellisResult(np.full((T, A), 1.0 / A), -math.inf, -math.inf, True, bounds)
    prior = prepare_priors(code, N_o, priors)
    mask = code.input_mask(N_o)
    Gs = [section_metrics(y, code, N_o, params, b) for y in ys]
    _, idx = section_tables(code, N_o)
    nxt = code.next_state
    dvecs = list(itertools.product(range(b.Delta), repeat=M))
    muvecs = list(itertools.product(range(b.delta), repeat=M))
    n = code.n

    def edges_of(t):
        for s in range(S):
            for a in range(A):
                if not mask[t, a]:
                    continue
                c = idx[t, s, a]
                for dv in dvecs:
                    for mv in muvecs:
                        dn = tuple(d + mu - n for d, mu in zip(dv, mv))
                        inside = all(0 <= v < b.Delta for v in dn)
                        g = prior[t, a]
                        if inside:
                            for j in range(M):
                                g *= Gs[j][t, c, dv[j], mv[j]]
                        yield s, a, dv, nxt[s, a], dn, g, inside

    count = 0
    alpha = [dict() for _ in range(T + 1)]
    alpha[0][(0,) + (-b.d_min,) * M] = 1.0
    for t in range(T):
        for s, a, dv, sn, dn, g, inside in edges_of(t):
            count += 1
            if inside and g:
                v = alpha[t].get((s,) + dv, 0.0)
                if v:
                    key = (sn,) + dn
                    alpha[t + 1][key] = alpha[t + 1].get(key, 0.0) + v * g
    end = (0,) + tuple(d - b.d_min for d in drifts)
    py = alpha[T].get(end, 0.0)
    beta = [dict() for _ in range(T + 1)]
    beta[T][end] = 1.0
    app = np.zeros((T, A))
    for t in range(T - 1, -1, -1):
        for s, a, dv, sn, dn, g, inside in edges_of(t):
            if inside and g:
                bv = beta[t + 1].get((sn,) + dn, 0.0)
                if bv:
                    key = (s,) + dv
                    beta[t][key] = beta[t].get(key, 0.0) + g * bv
                    app[t, a] += alpha[t].get(key, 0.0) * g * bv
    if not py > 0:
        return TrellisResult(np.full((T, A), 1.0 / A), -math.inf, -math.inf, True, b, count)
    app /= app.sum(axis=1, keepdims=True)
    pb = beta[0].get((0,) + (-b.d_min,) * M, 0.0)
    return TrellisResult(app, math.log(py), math.log(pb) if pb > 0 else -math.inf, False, b, count)


def combine_separate(apps, priors=None):
    """Combine per-read APPs as ``prod_j p(w|y_j) / p(w)^(M-1)``, row-normalised.

    Returns ``(app, collapsed)``; rows whose product vanishes everywhere are
    replaced by uniform rows and flagged in the boolean vector ``collapsed``.
    """
    apps = [np.asarray(a, dtype=float) for a in apps]
    M = len(apps)
    if M == 0:
        raise ValueError("nothing to combine")
    shape = apps[0].shape
    if any(a.shape != shape for a in apps):
        raise ValueError("APP matrices differ in shape")
    if priors is None:
        logp = np.full(shape, -math.log(shape[1]))
    else:
        pr = np.asarray(priors, dtype=float)
        if (pr <= 0).any():
            raise ValueError("priors must be strictly positive")
        logp = np.log(pr / pr.sum(axis=1, keepdims=True))
    with np.errstate(divide="ignore"):
        L = sum(np.log(a) for a in apps) - (M - 1) * logp
    top = L.max(axis=1, keepdims=True)
    collapsed = ~np.isfinite(top[:, 0])
    out = np.exp(L - np.where(collapsed[:, None], 0.0, top))
    out = np.where(collapsed[:, None], 1.0 / shape[1], out)
    out /= out.sum(axis=1, keepdims=True)
    return out, collapsed


def decode_separate(
    reads,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
) -> TrellisResult:
    """Decode each read alone and combine the APPs; erased reads are left out."""
    ys = _reads(reads)
    results = [decode_single(y, code, params, N_o, priors, bounds, I_max) for y in ys]
    edges = sum(r.edges for r in results)
    good = [r for r in results if not r.erased]
    T, A = code.n_sections(N_o), code.A
    if not good:
        return TrellisResult(np.full((T, A), 1.0 / A), -math.inf, -math.inf, True, bounds, edges)
    prior = prepare_priors(code, N_o, priors)
    # masked termination entries are zero in every APP; keep them out of the log-ratio
    safe_prior = np.where(prior > 0, prior, 1.0)
    app, collapsed = combine_separate([r.app for r in good], safe_prior)
    app = app * (prior > 0)
    app /= app.sum(axis=1, keepdims=True)
    res = TrellisResult(app, sum(r.log_py for r in good), sum(r.log_py_backward for r in good), False, good[0].bounds, edges)
    res.extra.update(collapsed=collapsed, reads_used=len(good), reads_erased=len(ys) - len(good))
    return res


@dataclass
class ComplexityReport:
    edges_single: int
    edges_separate: int
    edges_joint: int
    params: dict


def complexity_of(N: int, n: int, nu: int, k: int, Delta: int, delta: int, M: int = 1) -> ComplexityReport:
    """Closed-form edge counts of the single, separate and joint trellises."""
    base = (N // n) * 2 ** (nu + k)
    single = base * Delta * delta
    return ComplexityReport(
        edges_single=single,
        edges_separate=M * single,
        edges_joint=base * (Delta * delta) ** M,
        params=dict(N=N, n=n, nu=nu, k=k, Delta=Delta, delta=delta, M=M),
    )


def complexity_for(code: InnerCode, N_o: int, bounds: DriftBounds, M: int = 1) -> ComplexityReport:
    return complexity_of(code.channel_length(N_o), code.n, code.nu, code.k, bounds.Delta, bounds.delta, M)


__all__ = [
    "CapacityError",
    "ComplexityReport",
    "combine_separate",
    "complexity_for",
    "complexity_of",
    "count_edges",
    "decode_joint",
    "decode_joint_reference",
    "decode_separate",
    "joint_log_likelihood",
]
