"""Achievable information rate estimates, in bits per channel use.

A channel use is one transmitted DNA symbol of one read, so a frame of
``N_o`` outer symbols costs ``n (N_o + m)`` channel uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import kernels
from .channel import ChannelParams, transmit_multi
from .inner import InnerCode, identity_code
from .multiseq import decode_joint, decode_separate, joint_log_likelihood
from .trellis import I_MAX_DEFAULT, decode_single, log_likelihood

LOG2E = 1.0 / math.log(2.0)


@dataclass
class RateEstimate:
    bits_per_channel_use: float
    stderr: float
    channel_uses: int  # per frame
    N_o: int
    samples: int  # frames that entered the average
    estimator: str
    p: float = float("nan")
    M: int = 1
    erased: int = 0
    per_frame: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.estimator not in ("bcjr_once", "mutual_info", "uncoded_mi"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


def _summarize(values, estimator, uses, N_o, p, M, erased) -> RateEstimate:
    v = np.asarray(values, dtype=float)
    mean = float(v.mean()) if v.size else float("nan")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return RateEstimate(mean, se, uses, N_o, int(v.size), estimator, p, M, erased, list(v))


def _app_for(reads, code, params, N_o, mode, I_max):
    if mode == "joint":
        return decode_joint(reads, code, params, N_o, I_max=I_max)
    if len(reads.reads) == 1:
        return decode_single(reads.reads[0], code, params, N_o, I_max=I_max)
    return decode_separate(reads, code, params, N_o, I_max=I_max)


def bcjr_once_rate(
    code: InnerCode,
    params: ChannelParams,
    M: int,
    N_o: int,
    frames: int,
    rng: np.random.Generator,
    mode: str = "separate",
    I_max: int = I_MAX_DEFAULT,
) -> RateEstimate:
    """Mismatched-decoding rate of a receiver that uses the inner APPs once.

    Per frame: ``(N_o log2 q_o + sum_i log2 p(w_i | y)) / (n (N_o + m))`` with
    the sum over the information positions and ``w_i`` the transmitted symbol.
    """
    if mode not in ("joint", "separate"):
        raise ValueError("mode must be 'joint' or 'separate'")
    uses = code.channel_length(N_o)
    lq = math.log2(code.A)
    vals, erased = [], 0
    for _ in range(frames):
        w = rng.integers(0, code.A, size=N_o)
        reads = transmit_multi(code.encode(w), params, M, rng)
        res = _app_for(reads, code, params, N_o, mode, I_max)
        if res.erased:
            erased += 1
            continue
        pw = np.maximum(res.app[np.arange(N_o), w], 1e-300)
        vals.append((N_o * lq + float(np.log2(pw).sum())) / uses)
    return _summarize(vals, "bcjr_once", uses, N_o, params.p_ins, M, erased)


def mutual_info_rate(
    code: InnerCode,
    params: ChannelParams,
    M: int,
    N_o: int,
    frames: int,
    rng: np.random.Generator,
    I_max: int = I_MAX_DEFAULT,
) -> RateEstimate:
    """Per-frame ``(log2 p(y | w) - log2 p(y)) / (n (N_o + m))`` from forward passes.

    ``p(y)`` runs the forward recursion with uniform input priors;
    ``p(y | w)`` clamps the input to the transmitted frame. With several
    reads, ``p(y)`` is the joint-trellis likelihood and ``p(y | w)`` the
    product of per-read clamped likelihoods.
    """
    uses = code.channel_length(N_o)
    vals, erased = [], 0
    for _ in range(frames):
        w = rng.integers(0, code.A, size=N_o)
        reads = transmit_multi(code.encode(w), params, M, rng)
        clamp = np.zeros((N_o, code.A))
        clamp[np.arange(N_o), w] = 1.0
        if M == 1:
            lpy = log_likelihood(reads.reads[0], code, params, N_o, I_max=I_max)
        else:
            lpy = joint_log_likelihood(reads, code, params, N_o, I_max=I_max)
        lpyw = [log_likelihood(y, code, params, N_o, priors=clamp, I_max=I_max) for y in reads.reads]
        if lpy is None or any(v is None for v in lpyw) or not math.isfinite(lpy) or not all(map(math.isfinite, lpyw)):
            erased += 1
            continue
        vals.append((sum(lpyw) - lpy) * LOG2E / uses)
    return _summarize(vals, "mutual_info", uses, N_o, params.p_ins, M, erased)


# ---------------------------------------------------------------------------
# uncoded i.i.d. input, untruncated lattice


def full_lattice_logprob(x, y, params: ChannelParams) -> float:
    """``log p(y | x)`` over the whole sequence, with no drift truncation."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    N = x.size
    if N == 0:
        return 0.0 if y.size == 0 else -math.inf
    G = kernels.gamma_all(x.reshape(1, 1, N), y, N, 0, 1, y.size + 1, params.lattice_weights())
    v = float(G[0, 0, 0, y.size])
    if v > 0:
        return math.log(v)
    return _scaled_lattice(x, y, params)


def _scaled_lattice(x, y, params: ChannelParams) -> float:
    # row-by-row with rescaling, for sequences whose probability underflows
    w_ins, w_del, w_match, w_mis = params.lattice_weights()
    L = y.size
    F = np.zeros(L + 1)
    F[0] = 1.0
    F = lfilter([1.0], [1.0, -w_ins], F)
    log_s = 0.0
    for r, xr in enumerate(x):
        Q = np.where(y == xr, w_match, w_mis)
        Fn = w_del * F
        Fn[1:] += Q * F[:-1]
        if r < x.size - 1:
            Fn = lfilter([1.0], [1.0, -w_ins], Fn)
        z = Fn.sum()
        if not z > 0:
            return -math.inf
        F = Fn / z
        log_s += math.log(z)
    return log_s + math.log(F[L]) if F[L] > 0 else -math.inf


def marginal_logprob(reads, N: int, params: ChannelParams) -> float:
    """``log p(y_1, ..., y_M)`` for i.i.d. uniform inputs of length ``N``.

    Multi-dimensional lattice over the read positions. Insertions act
    independently per read (a first-order recursion along each axis); for
    each input symbol every read deletes or transmits it, and the symbol is
    averaged out.
    """
    ys = [np.asarray(y, dtype=np.int64) for y in reads]
    q = params.q
    w_ins, w_del = params.lattice_weights()[:2]
    p_tr = params.p_tr
    F = np.zeros(tuple(y.size + 1 for y in ys))
    F[(0,) * len(ys)] = 1.0
    log_s = 0.0
    emit = []
    for y in ys:
        # emit[x][l] = probability that a transmitted x shows up as y[l]
        e = np.where(y[None, :] == np.arange(q)[:, None], 1 - params.p_sub, params.p_sub / (q - 1))
        emit.append(e)
    for _ in range(N):
        # insertions ahead of this input symbol, independently per read
        for j in range(len(ys)):
            F = lfilter([1.0], [1.0, -w_ins], F, axis=j)
        new = np.zeros_like(F)
        for x in range(q):
            G = F
            for j, e in enumerate(emit):
                shape = [1] * F.ndim
                shape[j] = -1
                Gn = w_del * G
                sl_to = [slice(None)] * F.ndim
                sl_from = [slice(None)] * F.ndim
                sl_to[j] = slice(1, None)
                sl_from[j] = slice(None, -1)
                Gn[tuple(sl_to)] += p_tr * e[x].reshape(shape) * G[tuple(sl_from)]
                G = Gn
            new += G / q
        z = new.sum()
        if not z > 0:
            return -math.inf
        F = new / z
        log_s += math.log(z)
    end = F[tuple(y.size for y in ys)]
    return log_s + math.log(end) if end > 0 else -math.inf


def uncoded_mi_rate(params: ChannelParams, M: int, N: int, frames: int, rng: np.random.Generator) -> RateEstimate:
    """Mutual-information rate of i.i.d. uniform input with no inner code."""
    q = params.q
    vals = []
    for _ in range(frames):
        x = rng.integers(0, q, size=N)
        reads = transmit_multi(x, params, M, rng)
        lpyx = sum(full_lattice_logprob(x, y, params) for y in reads.reads)
        lpy = marginal_logprob(reads.reads, N, params)
        vals.append((lpyx - lpy) * LOG2E / N)
    return _summarize(vals, "uncoded_mi", N, N, params.p_ins, M, 0)


def identity_mi_rate(params: ChannelParams, M: int, N: int, frames: int, rng: np.random.Generator) -> RateEstimate:
    """Trellis-based estimate for the identity inner code (drift-truncated)."""
    return mutual_info_rate(identity_code(params.q), params, M, N, frames, rng)
