"""Nonbinary protograph LDPC codes over GF(2^k).

Lifting places circulants by progressive edge growth, the encoder comes
from Gaussian elimination, decoding is flooding sum-product, and the
iterative threshold is estimated by Monte-Carlo density evolution driven by
samples of the inner decoder's APPs.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .gf import FieldSpec, gf

DATA_DIR = Path(__file__).parent / "data"


# ---------------------------------------------------------------------------
# protographs and lifted matrices


@dataclass
class Protograph:
    B: np.ndarray  # (r_p, n_p): B[i, j] edges between check type i and variable type j
    b_max: int = 2

    def __post_init__(self):
        self.B = np.atleast_2d(np.asarray(self.B, dtype=np.int64))
        if (self.B < 0).any():
            raise ValueError("base matrix entries must be nonnegative")

    @property
    def r_p(self) -> int:
        return self.B.shape[0]

    @property
    def n_p(self) -> int:
        return self.B.shape[1]

    @property
    def design_rate(self) -> float:
        return (self.n_p - self.r_p) / self.n_p

    def within_bmax(self) -> bool:
        return bool((self.B <= self.b_max).all())


def read_protograph(path) -> Protograph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    r, c = int(rows[0][0]), int(rows[0][1])
    B = np.array([[int(v) for v in row] for row in rows[1 : 1 + r]], dtype=np.int64)
    if B.shape != (r, c):
        raise ValueError(f"{path}: expected a {r}x{c} base matrix")
    return Protograph(B)


def designed_protograph() -> Protograph:
    return read_protograph(DATA_DIR / "protograph_designed.txt")


def regular_protograph(dv: int = 3, dc: int = 6) -> Protograph:
    """Single-check-type protograph of a (dv, dc)-regular ensemble."""
    if dc % dv:
        raise ValueError("dc must be a multiple of dv")
    return Protograph(np.full((1, dc // dv), dv), b_max=dv)


@dataclass
class NbParityCheck:
    """Sparse parity-check matrix over GF(q): edge lists sorted by (row, col)."""

    rows: int
    cols: int
    q: int
    r: np.ndarray
    c: np.ndarray
    w: np.ndarray
    girth: int | None = None
    shifts: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.int64)
        self.c = np.asarray(self.c, dtype=np.int64)
        self.w = np.asarray(self.w, dtype=np.int64)
        order = np.lexsort((self.c, self.r))
        self.r, self.c, self.w = self.r[order], self.c[order], self.w[order]
        if self.w.size and (self.w.min() < 1 or self.w.max() >= self.q):
            raise ValueError("edge weights must be nonzero field elements")

    @property
    def field(self) -> FieldSpec:
        return gf(int(math.log2(self.q)))

    @property
    def n_edges(self) -> int:
        return int(self.r.size)

    def dense(self) -> np.ndarray:
        H = np.zeros((self.rows, self.cols), dtype=np.int64)
        H[self.r, self.c] = self.w
        return H

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.c, minlength=self.cols)

    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.r, minlength=self.rows)

    def reweighted(self, rng: np.random.Generator) -> "NbParityCheck":
        """Same graph with fresh uniform nonzero edge weights."""
        w = rng.integers(1, self.q, size=self.n_edges)
        return NbParityCheck(self.rows, self.cols, self.q, self.r, self.c, w, self.girth, self.shifts)

    def syndrome(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        prod = self.field.mul_table[self.w, x[self.c]]
        s = np.zeros(self.rows, dtype=np.int64)
        np.bitwise_xor.at(s, self.r, prod)
        return s

    def is_codeword(self, x) -> bool:
        return not self.syndrome(x).any()


def write_parity_check(path, H: NbParityCheck) -> None:
    """Sparse triplet text: header ``rows cols q``, then ``row col weight`` lines."""
    lines = [f"{H.rows} {H.cols} {H.q}"]
    lines += [f"{r} {c} {w}" for r, c, w in zip(H.r, H.c, H.w)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_parity_check(path) -> NbParityCheck:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    R, C, q = (int(v) for v in rows[0])
    t = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64).reshape(-1, 3)
    return NbParityCheck(R, C, q, t[:, 0], t[:, 1], t[:, 2])


# ---------------------------------------------------------------------------
# girth


def _adjacency(rows: int, cols: int, r, c) -> list[list[int]]:
    """Tanner graph adjacency; variables are ``0..cols-1``, checks follow."""
    adj: list[list[int]] = [[] for _ in range(cols + rows)]
    for ri, ci in zip(r, c):
        adj[int(ci)].append(cols + int(ri))
        adj[cols + int(ri)].append(int(ci))
    return adj


def _shortest_cycle_through(adj, v: int, limit: float = math.inf) -> float:
    """Length of the shortest cycle through ``v`` (inf if none within ``limit``)."""
    dist = {v: 0}
    branch = {v: -1}
    parent = {v: -1}
    dq = deque([v])
    best = math.inf
    while dq:
        u = dq.popleft()
        if 2 * dist[u] + 1 >= min(best, limit):
            break
        for w in adj[u]:
            if w == parent[u]:
                continue
            if w in dist:
                if branch[w] != branch[u] or w == v:
                    best = min(best, dist[u] + dist[w] + 1)
                continue
            dist[w] = dist[u] + 1
            parent[w] = u
            branch[w] = w if u == v else branch[u]
            dq.append(w)
    return best


def girth(H: NbParityCheck, columns=None) -> int | None:
    """Tanner-graph girth by BFS from every variable node (or the given ones)."""
    adj = _adjacency(H.rows, H.cols, H.r, H.c)
    best = math.inf
    for v in range(H.cols) if columns is None else columns:
        best = min(best, _shortest_cycle_through(adj, int(v), best))
    return None if best == math.inf else int(best)


# ---------------------------------------------------------------------------
# lifting


def lift(proto: Protograph, Q_p: int, rng: np.random.Generator, q: int = 16) -> NbParityCheck:
    """Quasi-cyclic lift with PEG-chosen circulant shifts and random GF(q)* weights.

    Block ``(i, j)`` with shift set ``S`` joins check ``i*Q + r`` to variable
    ``j*Q + (r + s) mod Q`` for each ``s`` in ``S``. Shifts are placed one at a
    time, variable type by variable type, each maximising the shortest cycle
    through the current variable type; ties go to the smallest shift.
    """
    B = proto.B
    r_p, n_p = B.shape
    if B.size and B.max() > Q_p:
        raise ValueError(f"lift size {Q_p} cannot hold a circulant of weight {B.max()}")
    shifts: dict[tuple[int, int], list[int]] = {}
    rows, cols = r_p * Q_p, n_p * Q_p

    def edges_from(sh):
        rr, cc = [], []
        for (i, j), ss in sh.items():
            for s in ss:
                rloc = np.arange(Q_p)
                rr.append(i * Q_p + rloc)
                cc.append(j * Q_p + (rloc + s) % Q_p)
        if not rr:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        return np.concatenate(rr), np.concatenate(cc)

    for j in range(n_p):
        for i in range(r_p):
            for _ in range(int(B[i, j])):
                used = shifts.setdefault((i, j), [])
                best_s, best_g = None, -1.0
                for s in range(Q_p):
                    if s in used:
                        continue
                    used.append(s)
                    rr, cc = edges_from(shifts)
                    adj = _adjacency(rows, cols, rr, cc)
                    g = _shortest_cycle_through(adj, j * Q_p)
                    used.pop()
                    if g > best_g:
                        best_s, best_g = s, g
                        if g == math.inf:
                            break
                used.append(best_s)
    rr, cc = edges_from(shifts)
    w = rng.integers(1, q, size=rr.size) if rr.size else np.zeros(0, np.int64)
    H = NbParityCheck(rows, cols, q, rr, cc, w, shifts={k: list(v) for k, v in shifts.items()})
    # every node of a variable type sees the same cycles, so one per type suffices
    H.girth = girth(H, columns=[j * Q_p for j in range(n_p)])
    return H


# ---------------------------------------------------------------------------
# encoding


class LdpcEncoder:
    """Systematic encoder from the reduced row echelon form of ``H``.

    Information symbols occupy the non-pivot columns; the pivot columns carry
    parity. ``dimension`` is ``cols - rank(H)``.
    """

    def __init__(self, H: NbParityCheck):
        F = H.field
        mul, inv = F.mul_table, F.inv_table
        A = H.dense()
        R, C = A.shape
        pivots = []
        row = 0
        for col in range(C):
            if row == R:
                break
            nz = np.flatnonzero(A[row:, col])
            if nz.size == 0:
                continue
            p = row + nz[0]
            if p != row:
                A[[row, p]] = A[[p, row]]
            A[row] = mul[inv[A[row, col]], A[row]]
            f = A[:, col].copy()
            f[row] = 0
            hit = np.flatnonzero(f)
            if hit.size:
                A[hit] ^= mul[f[hit][:, None], A[row][None, :]]
            pivots.append(col)
            row += 1
        self.H = H
        self.rank = row
        self.pivots = np.array(pivots, dtype=np.int64)
        self.info_positions = np.setdiff1d(np.arange(C), self.pivots)
        self._P = A[: self.rank][:, self.info_positions]
        self._mul = mul

    @property
    def dimension(self) -> int:
        return self.info_positions.size

    def encode(self, info) -> np.ndarray:
        u = np.asarray(info, dtype=np.int64)
        if u.size != self.dimension:
            raise ValueError(f"expected {self.dimension} information symbols, got {u.size}")
        c = np.zeros(self.H.cols, dtype=np.int64)
        c[self.info_positions] = u
        if self.rank:
            prod = self._mul[self._P, u[None, :]]
            c[self.pivots] = np.bitwise_xor.reduce(prod, axis=1) if u.size else 0
        return c

    def extract(self, word) -> np.ndarray:
        return np.asarray(word)[self.info_positions]


def encode_ldpc(info, H: NbParityCheck) -> np.ndarray:
    return LdpcEncoder(H).encode(info)


# ---------------------------------------------------------------------------
# message-passing primitives (shared by BP and density evolution)


def _normalize(P: np.ndarray) -> np.ndarray:
    s = P.sum(axis=-1, keepdims=True)
    q = P.shape[-1]
    return np.where(s > 0, P / np.where(s > 0, s, 1.0), 1.0 / q)


def xor_conv(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Distribution of ``a XOR b`` for independent ``a ~ X``, ``b ~ Y`` (last axis)."""
    q = X.shape[-1]
    a = np.arange(q)
    xt = a[:, None] ^ a[None, :]  # xt[z, a] = z ^ a
    return np.einsum("...a,...za->...z", X, Y[..., xt])


class _Wht:
    def __init__(self, q: int):
        self.H = hadamard(q).astype(float)
        self.q = q

    def fwd(self, X):
        return X @ self.H

    def inv(self, F):
        return np.clip(F @ self.H / self.q, 0.0, None)


def _leave_one_out(X: np.ndarray, op, identity: np.ndarray) -> np.ndarray:
    """``out[..., k, :] = op`` over all slots except ``k`` along axis -2."""
    d = X.shape[-2]
    pre = [np.broadcast_to(identity, X[..., 0, :].shape)]
    for k in range(d - 1):
        pre.append(op(pre[-1], X[..., k, :]))
    out = np.empty_like(X)
    suf = np.broadcast_to(identity, X[..., 0, :].shape)
    for k in range(d - 1, -1, -1):
        out[..., k, :] = op(pre[k], suf)
        suf = op(suf, X[..., k, :])
    return out


def _check_update(Xz: np.ndarray, transform: str, wht: _Wht | None) -> np.ndarray:
    """Leave-one-out XOR convolution of z-domain messages ``(..., d, q)``."""
    q = Xz.shape[-1]
    if transform == "wht":
        F = wht.fwd(Xz)
        out = _leave_one_out(F, np.multiply, np.ones(q))
        return _normalize(wht.inv(out))
    delta = np.zeros(q)
    delta[0] = 1.0
    return _normalize(_leave_one_out(Xz, lambda a, b: _normalize(xor_conv(a, b)), delta))


# ---------------------------------------------------------------------------
# belief propagation


@dataclass
class BpResult:
    word: np.ndarray
    converged: bool
    iterations: int
    posterior: np.ndarray


def decode_bp(apps, H: NbParityCheck, max_iter: int = 100, transform: str = "direct") -> BpResult:
    """Flooding sum-product decoding over GF(q).

    ``apps`` is (cols, q), rows need not be normalised. ``transform`` picks
    direct O(q^2) check-node convolutions or Walsh-Hadamard products.
    """
    if transform not in ("direct", "wht"):
        raise ValueError("transform must be 'direct' or 'wht'")
    q = H.q
    L = _normalize(np.asarray(apps, dtype=float))
    if L.shape != (H.cols, q):
        raise ValueError(f"apps must have shape ({H.cols}, {q})")
    E = H.n_edges
    F = H.field
    mul, inv = F.mul_table, F.inv_table
    to_z = mul[inv[H.w]][:, :]  # to_z[e, z] = h^-1 z
    from_z = mul[H.w]  # from_z[e, x] = h x
    wht = _Wht(q) if transform == "wht" else None

    def padded(groups, size):
        d = max((len(g) for g in groups), default=0)
        idx = np.full((size, max(d, 1)), E, dtype=np.int64)
        for k, g in enumerate(groups):
            idx[k, : len(g)] = g
        return idx

    order = np.arange(E)
    chk = padded(np.split(order, np.cumsum(H.row_degrees())[:-1]), H.rows)
    by_col = np.argsort(H.c, kind="stable")
    var = padded(np.split(by_col, np.cumsum(H.col_degrees())[:-1]), H.cols)

    c2v = np.full((E + 1, q), 1.0 / q)
    c2v[E] = 1.0  # variable-side padding: neutral for products
    delta = np.zeros(q)
    delta[0] = 1.0

    def posterior():
        return _normalize(L * np.prod(c2v[var], axis=1))

    post = L
    it = 0
    x = post.argmax(axis=1)
    for it in range(1, max_iter + 1):
        # variable to check
        inc = c2v[var]  # (cols, dv, q)
        out = _leave_one_out(inc, lambda a, b: _normalize(a * b), np.ones(q)) * L[:, None, :]
        v2c = np.empty((E + 1, q))
        v2c[var[var < E]] = _normalize(out[var < E])
        # check to variable, in the z = h x domain
        vz = np.take_along_axis(v2c[:E], to_z, axis=1)
        vz = np.vstack([vz, delta])
        cz = _check_update(vz[chk], transform, wht)
        msg = np.empty((E, q))
        msg[chk[chk < E]] = cz[chk < E]
        c2v[:E] = _normalize(np.take_along_axis(msg, from_z, axis=1))
        post = posterior()
        x = post.argmax(axis=1)
        if H.is_codeword(x):
            return BpResult(x, True, it, post)
    return BpResult(x, H.is_codeword(x), it, post)


# ---------------------------------------------------------------------------
# Monte-Carlo density evolution


@dataclass
class ThresholdEstimate:
    p_th: float
    bracket: tuple[float, float]
    probes: list = field(default_factory=list)  # (p, converged, final symbol error)
    wide: bool = False


def _shift_to_zero(apps: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Re-express APP rows relative to the true symbol (all-zero reference)."""
    q = apps.shape[1]
    idx = np.arange(q)[None, :] ^ truth[:, None]
    return np.take_along_axis(apps, idx, axis=1)


def density_evolution(
    proto: Protograph,
    pool: np.ndarray,
    rng: np.random.Generator,
    pop: int = 4000,
    max_iter: int = 100,
    tol: float = 1e-3,
    window: int = 10,
):
    """Population-dynamics DE of a protograph fed by zero-referenced APP samples.

    Returns ``(converged, error_trace)``; ``error_trace[t]`` is the symbol error
    rate of the variable-node decisions after iteration ``t``.
    """
    B = proto.B
    r_p, n_p = B.shape
    q = pool.shape[1]
    field_ = gf(int(math.log2(q)))
    mul, inv = field_.mul_table, field_.inv_table
    wht = _Wht(q)
    edges = [(i, j) for i in range(r_p) for j in range(n_p) for _ in range(int(B[i, j]))]
    if not edges:
        return False, []
    E = len(edges)
    var_edges = [[e for e, (_, j) in enumerate(edges) if j == jj] for jj in range(n_p)]
    chk_edges = [[e for e, (i, _) in enumerate(edges) if i == ii] for ii in range(r_p)]
    c2v = np.full((E, pop, q), 1.0 / q)

    def channel():
        return pool[rng.integers(0, pool.shape[0], size=pop)]

    def permute(P, h, to_z):
        idx = mul[inv[h]] if to_z else mul[h]
        return np.take_along_axis(P, idx, axis=1)

    trace = []
    for _ in range(max_iter):
        v2c = np.empty_like(c2v)
        errs = []
        for j, es in enumerate(var_edges):
            if not es:
                continue
            draws = {e: c2v[e][rng.integers(0, pop, size=pop)] for e in es}
            ch = channel()
            for e in es:
                m = ch.copy()
                for e2 in es:
                    if e2 != e:
                        m = _normalize(m * draws[e2])
                v2c[e] = m
            full = ch
            for e2 in es:
                full = _normalize(full * draws[e2])
            # ties count fractionally against the zero symbol
            top = full.max(axis=1, keepdims=True)
            at_top = full >= top * (1 - 1e-12)
            errs.append(float(np.mean(1.0 - at_top[:, 0] / at_top.sum(axis=1))))
        for i, es in enumerate(chk_edges):
            if not es:
                continue
            hs = {e: rng.integers(1, q, size=pop) for e in es}
            zf = {}
            for e in es:
                sample = v2c[e][rng.integers(0, pop, size=pop)]
                zf[e] = wht.fwd(permute(sample, hs[e], True))
            for e in es:
                prod = np.ones((pop, q))
                for e2 in es:
                    if e2 != e:
                        prod = prod * zf[e2]
                out = _normalize(wht.inv(prod))
                c2v[e] = _normalize(permute(out, hs[e], False))
        trace.append(float(np.mean(errs)))
        if trace[-1] == 0.0:
            return True, trace
        if len(trace) > window and trace[-1] < tol:
            tail = trace[-window - 1 :]
            if all(b < a for a, b in zip(tail, tail[1:])):
                return True, trace
    return False, trace


def estimate_threshold(
    proto: Protograph,
    pool_fn,
    rng: np.random.Generator,
    lo: float = 0.0,
    hi: float = 0.3,
    steps: int = 8,
    pop: int = 4000,
    max_iter: int = 100,
    min_pool: int = 2000,
) -> ThresholdEstimate:
    """Bisection for the largest ``p`` at which density evolution converges.

    ``pool_fn(p)`` returns ``(apps, truth)`` samples of the inner decoder at
    ``p_ins = p_del = p``. Protographs without check nodes get threshold 0.
    """
    if proto.B.size == 0 or not proto.B.any():
        return ThresholdEstimate(0.0, (0.0, 0.0))
    probes = []
    wide = False
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        apps, truth = pool_fn(mid)
        if apps.shape[0] < min_pool:
            wide = True
        ok, trace = density_evolution(proto, _shift_to_zero(_normalize(apps), truth), rng, pop, max_iter)
        probes.append((mid, ok, trace[-1] if trace else float("nan")))
        if ok:
            lo = mid
        else:
            hi = mid
    return ThresholdEstimate(lo, (lo, hi), probes, wide)
