"""Nonbinary polar codes with the kernel ``[[1, 0], [alpha, beta]]`` over GF(2^k).

Encoding is the butterfly ``w = (enc(a) + alpha*enc(b), beta*enc(b))`` for the
halves ``a, b`` of ``u``. Decoding is CRC-aided successive cancellation list
decoding; SC is the list-size-one special case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gf import FieldSpec, gf

DATA_DIR = Path(__file__).parent / "data"
CRC8_POLY = 0x07


def _field(q: int) -> FieldSpec:
    k = int(math.log2(q))
    if 1 << k != q:
        raise ValueError("q must be a power of two")
    return gf(k)


def _check_length(N: int) -> None:
    if N < 1 or N & (N - 1):
        raise ValueError(f"block length {N} is not a power of two")


def encode_polar(u, alpha: int, beta: int, q: int) -> np.ndarray:
    """Kronecker-power transform of ``u`` (length a power of two)."""
    F = _field(q)
    if beta == 0:
        raise ValueError("beta must be nonzero")
    x = np.array(u, dtype=np.int64)
    N = x.size
    _check_length(N)
    mul = F.mul_table
    # bottom-up butterflies: each pass merges neighbouring blocks of `width` symbols
    width = 1
    while width < N:
        x = x.reshape(-1, 2, width)
        a, b = x[:, 0, :], x[:, 1, :]
        x = np.concatenate([a ^ mul[alpha, b], mul[beta, b]], axis=1).reshape(-1)
        width *= 2
    return x


def polar_inverse(w, alpha: int, beta: int, q: int) -> np.ndarray:
    """Undo :func:`encode_polar` with the explicit 2x2 kernel inverse."""
    F = _field(q)
    mul = F.mul_table
    binv = F.inv(beta)
    x = np.array(w, dtype=np.int64)
    N = x.size
    _check_length(N)
    width = N // 2
    while width >= 1:
        x = x.reshape(-1, 2, width)
        top, bot = x[:, 0, :], x[:, 1, :]
        b = mul[binv, bot]
        a = top ^ mul[alpha, b]
        x = np.concatenate([a, b], axis=1).reshape(-1)
        width //= 2
    return x


# ---------------------------------------------------------------------------
# CRC


def crc8(bits, poly: int = CRC8_POLY) -> int:
    """Plain CRC-8 (zero init, no reflection, no final xor) of a bit sequence."""
    reg = 0
    for b in bits:
        top = (reg >> 7) ^ int(b)
        reg = (reg << 1) & 0xFF
        if top & 1:
            reg ^= poly
    return reg


def symbols_to_bits(sym, bits_per: int) -> np.ndarray:
    sym = np.asarray(sym, dtype=np.int64)
    shifts = np.arange(bits_per - 1, -1, -1)
    return ((sym[:, None] >> shifts[None, :]) & 1).reshape(-1)


def crc_symbols(info, q: int, crc_bits: int = 8) -> np.ndarray:
    """CRC of the info bit string, packed MSB-first into ``ceil(crc_bits / log2 q)`` symbols."""
    if crc_bits == 0:
        return np.zeros(0, dtype=np.int64)
    if crc_bits != 8:
        raise ValueError("only the 8-bit CRC is implemented")
    bps = int(math.log2(q))
    c = crc8(symbols_to_bits(info, bps))
    n_sym = -(-crc_bits // bps)
    out = np.zeros(n_sym, dtype=np.int64)
    for i in range(n_sym):
        shift = (n_sym - 1 - i) * bps
        out[i] = (c >> shift) & (q - 1)
    return out


# ---------------------------------------------------------------------------
# code description


@dataclass
class PolarSpec:
    N_o: int
    K: int
    q: int
    alpha: int
    beta: int = 1
    frozen: tuple = ()
    crc_bits: int = 8
    list_size: int = 32

    def __post_init__(self):
        _check_length(self.N_o)
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        if not 0 <= self.alpha < self.q or not 0 < self.beta < self.q:
            raise ValueError("kernel entries must be field elements")
        self.frozen = tuple(sorted(int(i) for i in self.frozen))
        if self.frozen and len(self.frozen) != self.n_frozen:
            raise ValueError(f"expected {self.n_frozen} frozen positions, got {len(self.frozen)}")

    @property
    def crc_syms(self) -> int:
        return -(-self.crc_bits // int(math.log2(self.q))) if self.crc_bits else 0

    @property
    def n_frozen(self) -> int:
        return self.N_o - self.K - self.crc_syms

    @property
    def frozen_mask(self) -> np.ndarray:
        m = np.zeros(self.N_o, dtype=bool)
        m[list(self.frozen)] = True
        return m

    @property
    def info_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen_mask)

    def with_frozen(self, frozen) -> "PolarSpec":
        return PolarSpec(self.N_o, self.K, self.q, self.alpha, self.beta, tuple(frozen), self.crc_bits, self.list_size)


def format_frozen(spec: PolarSpec) -> str:
    """Header ``N_o K q alpha beta crc_bits`` then the frozen indices."""
    lines = [f"{spec.N_o} {spec.K} {spec.q} {spec.alpha} {spec.beta} {spec.crc_bits}", " ".join(str(i) for i in spec.frozen)]
    return "\n".join(lines) + "\n"


def write_frozen(path, spec: PolarSpec) -> None:
    Path(path).write_text(format_frozen(spec))


def read_frozen(path, list_size: int = 32) -> PolarSpec:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    N_o, K, q, a, b, crc = (int(v) for v in lines[0].split())
    frozen = [int(v) for ln in lines[1:] for v in ln.split()]
    return PolarSpec(N_o, K, q, a, b, tuple(frozen), crc, list_size)


def build_u(info, spec: PolarSpec) -> np.ndarray:
    info = np.asarray(info, dtype=np.int64)
    if info.size != spec.K:
        raise ValueError(f"expected {spec.K} information symbols")
    u = np.zeros(spec.N_o, dtype=np.int64)
    u[spec.info_positions] = np.concatenate([info, crc_symbols(info, spec.q, spec.crc_bits)])
    return u


def polar_encode_info(info, spec: PolarSpec) -> np.ndarray:
    return encode_polar(build_u(info, spec), spec.alpha, spec.beta, spec.q)


def crc_ok(u, spec: PolarSpec) -> bool:
    payload = np.asarray(u)[spec.info_positions]
    info, crc = payload[: spec.K], payload[spec.K :]
    return bool(np.array_equal(crc, crc_symbols(info, spec.q, spec.crc_bits)))


# ---------------------------------------------------------------------------
# successive cancellation (list) decoding


def _norm(P):
    s = P.sum(axis=-1, keepdims=True)
    return np.where(s > 0, P / np.where(s > 0, s, 1.0), 1.0 / P.shape[-1])


class _Kernel:
    def __init__(self, q, alpha, beta):
        F = _field(q)
        self.q = q
        self.mul = F.mul_table
        self.ay = F.mul_table[alpha]  # alpha * y
        self.by = F.mul_table[beta]
        a = np.arange(q)
        self.xt = a[None, :] ^ self.ay[:, None]  # xt[y, x] = x + alpha y
        self.alpha, self.beta = alpha, beta

    def f(self, Pt, Pb):
        """P(v_a = x) = sum_y Pt(x + alpha y) Pb(beta y)."""
        return _norm(np.einsum("...yx,...y->...x", Pt[..., self.xt], Pb[..., self.by]))

    def g(self, Pt, Pb, va):
        """P(v_b = y | v_a) proportional to Pt(v_a + alpha y) Pb(beta y)."""
        idx = va[..., None] ^ self.ay
        return _norm(np.take_along_axis(Pt, idx, axis=-1) * Pb[..., self.by])

    def combine(self, va, vb):
        return np.concatenate([va ^ self.mul[self.alpha, vb], self.mul[self.beta, vb]], axis=-1)


@dataclass
class PolarDecodeResult:
    info: np.ndarray
    u: np.ndarray
    word: np.ndarray
    crc_ok: bool
    metric: float
    metrics: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _scl(P, frozen_mask, kern: _Kernel, L: int, genie=None, record=None):
    """Recursive list decoder over a frame stack ``P`` of shape (paths, size, q).

    Returns ``(v, u, parent, metric)``: re-encoded words, decided ``u``, the
    index of each surviving path's ancestor in the input stack, and the
    accumulated path metrics.
    """
    metric0 = np.zeros(P.shape[0])

    def rec(P, lo, hi, metric):
        size = hi - lo
        npaths = P.shape[0]
        if size == 1:
            leaf = _norm(P[:, 0, :])
            if record is not None:
                record[lo] = leaf[0].copy()
            if frozen_mask[lo] or genie is not None:
                sym = 0 if frozen_mask[lo] and genie is None else int(genie[lo])
                pen = -np.log(np.maximum(leaf[:, sym], 1e-300))
                dec = np.full((npaths, 1), sym, dtype=np.int64)
                return dec, dec.copy(), np.arange(npaths), metric + pen
            cand = metric[:, None] - np.log(np.maximum(leaf, 1e-300))  # (paths, q)
            flat = cand.reshape(-1)
            keep = min(L, flat.size)
            order = np.argsort(flat, kind="stable")[:keep]
            parent, sym = np.divmod(order, kern.q)
            dec = sym.reshape(-1, 1).astype(np.int64)
            return dec, dec.copy(), parent, flat[order]
        mid = lo + size // 2
        h = size // 2
        Pt, Pb = P[:, :h, :], P[:, h:, :]
        va, ua, par_a, metric = rec(kern.f(Pt, Pb), lo, mid, metric)
        Pt, Pb = Pt[par_a], Pb[par_a]
        vb, ub, par_b, metric = rec(kern.g(Pt, Pb, va), mid, hi, metric)
        v = kern.combine(va[par_b], vb)
        u = np.concatenate([ua[par_b], ub], axis=1)
        return v, u, par_a[par_b], metric

    return rec(P, 0, P.shape[1], metric0)


def decode_scl(apps, spec: PolarSpec, list_size: int | None = None) -> PolarDecodeResult:
    """CRC-aided SCL. The best-metric path passing the CRC wins; otherwise the
    best path overall is returned with ``crc_ok=False``."""
    P = _norm(np.asarray(apps, dtype=float))
    if P.shape != (spec.N_o, spec.q):
        raise ValueError(f"apps must have shape ({spec.N_o}, {spec.q})")
    L = spec.list_size if list_size is None else list_size
    kern = _Kernel(spec.q, spec.alpha, spec.beta)
    v, u, _, metric = _scl(P[None], spec.frozen_mask, kern, L)
    order = np.argsort(metric, kind="stable")
    pick, ok = order[0], False
    if spec.crc_bits:
        for i in order:
            if crc_ok(u[i], spec):
                pick, ok = i, True
                break
    else:
        ok = True
    info = u[pick][spec.info_positions][: spec.K]
    return PolarDecodeResult(info, u[pick], v[pick], ok, float(metric[pick]), metric[order])


def decode_sc(apps, spec: PolarSpec) -> PolarDecodeResult:
    return decode_scl(apps, spec, list_size=1)


def genie_sc(apps, u_true, alpha: int, beta: int, q: int):
    """Rate-one SC where each decision is replaced by the true symbol.

    Returns ``(errors, leaves)``: whether the hard decision at each position
    missed ``u_true``, and the leaf distributions ``p(u_i | y, u_<i)``.
    """
    P = _norm(np.asarray(apps, dtype=float))
    N = P.shape[0]
    leaves = np.zeros((N, q))
    kern = _Kernel(q, alpha, beta)
    u_true = np.asarray(u_true, dtype=np.int64)
    _scl(P[None], np.zeros(N, dtype=bool), kern, 1, genie=u_true, record=leaves)
    errors = leaves.argmax(axis=1) != u_true
    return errors, leaves


# ---------------------------------------------------------------------------
# Monte-Carlo design


@dataclass
class KernelScore:
    ratio: int
    failure: float
    stderr: float


def bucket_pool(apps, truth, q: int):
    """Index lists of pool rows grouped by true symbol."""
    truth = np.asarray(truth)
    return [np.flatnonzero(truth == a) for a in range(q)]


def kernel_failure(apps, truth, alpha: int, beta: int, samples: int, rng: np.random.Generator):
    """Monte-Carlo ``E[1 - p(u2 | u1 = 0, y)]`` for the kernel (alpha, beta).

    ``u2`` is uniform; APP rows for ``w1 = alpha u2`` and ``w2 = beta u2`` are
    drawn uniformly from the pool rows whose true symbol matches.
    Returns ``(mean, standard error)``.
    """
    apps = _norm(np.asarray(apps, dtype=float))
    q = apps.shape[1]
    F = _field(q)
    buckets = bucket_pool(apps, truth, q)
    if any(b.size == 0 for b in buckets):
        raise ValueError("APP pool lacks samples for some symbol value")
    u2 = rng.integers(0, q, size=samples)
    w1 = F.mul_table[alpha, u2]
    w2 = F.mul_table[beta, u2]
    r1 = rng.random(samples)
    r2 = rng.random(samples)
    sizes = np.array([b.size for b in buckets])
    i1 = np.array([buckets[a][k] for a, k in zip(w1, (r1 * sizes[w1]).astype(int))])
    i2 = np.array([buckets[a][k] for a, k in zip(w2, (r2 * sizes[w2]).astype(int))])
    ys = np.arange(q)
    like = apps[i1][:, F.mul_table[alpha, ys]] * apps[i2][:, F.mul_table[beta, ys]]  # (samples, q) over u2
    post = _norm(like)
    fail = 1.0 - post[np.arange(samples), u2]
    return float(fail.mean()), float(fail.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0


def optimize_kernel(apps, truth, samples: int, rng: np.random.Generator, ratios=None, beta: int = 1) -> list[KernelScore]:
    """Rank kernel ratios ``alpha/beta`` (beta fixed) by single-level failure rate."""
    q = np.asarray(apps).shape[1]
    ratios = range(1, q) if ratios is None else ratios
    F = _field(q)
    scores = []
    for r in ratios:
        alpha = F.mul(int(r), beta)
        m, se = kernel_failure(apps, truth, alpha, beta, samples, rng)
        scores.append(KernelScore(int(r), m, se))
    return sorted(scores, key=lambda s: (s.failure, s.ratio))


def select_frozen(spec: PolarSpec, app_source, trials: int, rng: np.random.Generator):
    """Genie-aided frozen-set selection.

    ``app_source(w, rng)`` returns APPs for codeword ``w`` (or ``None`` for an
    erased frame, which is skipped). Positions with the highest genie-SC
    error frequency are frozen; ties go to the lower index.
    Returns ``(spec_with_frozen, error_frequency)``.
    """
    N, q = spec.N_o, spec.q
    errs = np.zeros(N)
    used = 0
    for _ in range(trials):
        u = rng.integers(0, q, size=N)
        w = encode_polar(u, spec.alpha, spec.beta, q)
        apps = app_source(w, rng)
        if apps is None:
            continue
        e, _ = genie_sc(apps, u, spec.alpha, spec.beta, q)
        errs += e
        used += 1
    freq = errs / max(used, 1)
    order = sorted(range(N), key=lambda i: (-freq[i], i))
    return spec.with_frozen(sorted(order[: spec.n_frozen])), freq


def symmetric_app_source(eps: float, q: int):
    """Memoryless q-ary symmetric channel; returns exact per-symbol posteriors."""

    def source(w, rng):
        w = np.asarray(w)
        flip = rng.random(w.size) < eps
        y = np.where(flip, (w + rng.integers(1, q, size=w.size)) % q, w)
        P = np.full((w.size, q), eps / (q - 1))
        P[np.arange(w.size), y] = 1 - eps
        return P

    return source
