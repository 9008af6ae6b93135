"""Inner synchronisation codes.

Every inner code is presented to the decoders in trellis form: a per-section
table ``outputs[i, s, a]`` holding the ``n`` channel symbols emitted from code
state ``s`` on outer symbol ``a`` (offset already added), and a time-invariant
``next_state[s, a]``. Block codes and time-varying codes (TVCs) have a single
state; the grouped ``[5, 7]_8`` convolutional codes have four.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DATA_DIR = Path(__file__).parent / "data"


class DesignError(RuntimeError):
    """Raised when a code construction cannot meet its parameters."""


class CliqueDesignFailure(DesignError):
    """No clique of the requested size; ``largest`` holds the biggest one found."""

    def __init__(self, msg, largest):
        super().__init__(msg)
        self.largest = largest


# ---------------------------------------------------------------------------
# distances


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def levenshtein_indel(a: Sequence[int], b: Sequence[int]) -> int:
    """Insertion/deletion-only edit distance, ``|a| + |b| - 2 LCS(a, b)``."""
    a, b = list(a), list(b)
    return len(a) + len(b) - 2 * lcs_length(a, b)


def pairwise_indel(words: np.ndarray) -> np.ndarray:
    """All-pairs indel distance of equal-length words (vectorised LCS)."""
    words = np.asarray(words)
    V, n = words.shape
    eq = words[:, None, :, None] == words[None, :, None, :]  # (V, V, n, n)
    L = np.zeros((n + 1, n + 1, V, V), dtype=np.int16)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            L[i, j] = np.where(
                eq[:, :, i - 1, j - 1],
                L[i - 1, j - 1] + 1,
                np.maximum(L[i - 1, j], L[i, j - 1]),
            )
    return 2 * n - 2 * L[n, n].astype(np.int64)


# ---------------------------------------------------------------------------
# codebooks


@dataclass
class Codebook:
    words: np.ndarray  # (2**k, n) symbols
    q: int

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.int64)
        if self.words.ndim != 2:
            raise ValueError("codebook words must form a 2-D array")

    @property
    def size(self) -> int:
        return self.words.shape[0]

    @property
    def n(self) -> int:
        return self.words.shape[1]

    @property
    def k(self) -> int:
        return int(math.log2(self.size))

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in w) for w in self.words]


def verify_codebook(cb: Codebook, d_min: int):
    """Check all pairwise indel distances are at least ``d_min``.

    Returns ``(ok, worst_pair)`` where ``worst_pair`` is ``(i, j, distance)``
    for the closest pair (``None`` for codebooks with fewer than two words).
    """
    if cb.size < 2:
        return True, None
    D = pairwise_indel(cb.words)
    iu = np.triu_indices(cb.size, 1)
    flat = D[iu]
    w = int(np.argmin(flat))
    worst = (int(iu[0][w]), int(iu[1][w]), int(flat[w]))
    return bool(flat.min() >= d_min), worst


def dm_construct(n: int, k: int, q: int) -> Codebook:
    """Sparse construction: the ``2**k`` lowest-weight words of ``Sigma_q^n``.

    Ties in Hamming weight are broken by the word's value read as a base-``q``
    numeral (most significant symbol first).
    """
    size = 1 << k
    if size > q**n:
        raise DesignError(f"cannot pick {size} words from {q}^{n}")
    words = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)
    weight = (words != 0).sum(axis=1)
    # itertools.product enumerates in ascending base-q order already
    order = np.argsort(weight, kind="stable")
    return Codebook(words[order[:size]], q)


def write_codebooks(path, codebooks: Sequence[Codebook], d_min: int) -> None:
    """Plain-text codebook file: header ``n k q t d_min``, then one word per line."""
    cb0 = codebooks[0]
    lines = [f"{cb0.n} {cb0.k} {cb0.q} {len(codebooks)} {d_min}"]
    for cb in codebooks:
        for w in cb.words:
            lines.append(" ".join(str(int(v)) for v in w))
    Path(path).write_text("\n".join(lines) + "\n")


def read_codebooks(path) -> tuple[list[Codebook], int]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, k, q, t, d_min = (int(v) for v in rows[0])
    body = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64)
    size = 1 << k
    if body.shape != (t * size, n):
        raise ValueError(f"{path}: expected {t * size} words of length {n}")
    return [Codebook(body[i * size : (i + 1) * size], q) for i in range(t)], d_min


def tvc_codebooks() -> list[Codebook]:
    """The four quaternary ``n=4`` codebooks with minimum indel distance 4."""
    cbs, _ = read_codebooks(DATA_DIR / "tvc_codebooks.txt")
    return cbs


# ---------------------------------------------------------------------------
# clique search


def _greedy_color_bound(order: list[int], adj: list[int]) -> tuple[list[int], list[int]]:
    """Sequential greedy colouring; returns vertices sorted by colour and colour numbers."""
    colors = []  # list of bitmasks
    col_of = {}
    for v in order:
        for c, mask in enumerate(colors):
            if not adj[v] & mask:
                colors[c] |= 1 << v
                col_of[v] = c + 1
                break
        else:
            colors.append(1 << v)
            col_of[v] = len(colors)
    out = sorted(order, key=lambda v: col_of[v])
    return out, [col_of[v] for v in out]


def find_cliques(
    adj: list[int],
    target: int,
    max_cliques: int = 64,
    node_budget: int = 2_000_000,
    start_order: Sequence[int] | None = None,
) -> tuple[list[list[int]], list[int]]:
    """Branch and bound search for cliques of size ``target``.

    ``adj`` holds one neighbour bitmask per vertex. Candidate sets are bounded
    by a greedy colouring (a clique can use at most one vertex per colour).
    Returns the cliques found (each of exactly ``target`` vertices) and the
    largest clique seen.
    """
    V = len(adj)
    found: list[list[int]] = []
    best: list[int] = []
    nodes = 0
    order = list(start_order) if start_order is not None else sorted(
        range(V), key=lambda v: -bin(adj[v]).count("1")
    )

    def expand(clique: list[int], cand: list[int]):
        nonlocal nodes, best
        nodes += 1
        if nodes > node_budget or len(found) >= max_cliques:
            return
        if len(clique) > len(best):
            best = list(clique)
        if len(clique) == target:
            found.append(list(clique))
            return
        verts, cols = _greedy_color_bound(cand, adj)
        for idx in range(len(verts) - 1, -1, -1):
            if len(clique) + cols[idx] < target:
                return
            v = verts[idx]
            # candidates earlier in the colour order only, so each clique is seen once
            nxt = [u for u in verts[:idx] if adj[v] >> u & 1]
            clique.append(v)
            expand(clique, nxt)
            clique.pop()
            if nodes > node_budget or len(found) >= max_cliques:
                return

    expand([], order)
    return found, best


def _select_low_overlap(cliques: list[list[int]], t: int) -> list[list[int]]:
    chosen = [cliques[0]]
    union = set(cliques[0])
    remaining = list(range(1, len(cliques)))
    while len(chosen) < t and remaining:
        best = min(remaining, key=lambda i: (len(union & set(cliques[i])), i))
        remaining.remove(best)
        chosen.append(cliques[best])
        union |= set(cliques[best])
    return chosen


def clique_design(
    n: int,
    q: int,
    d_min: int,
    target_size: int,
    t: int = 1,
    max_cliques: int = 64,
    node_budget: int = 2_000_000,
) -> list[Codebook]:
    """Codebooks with pairwise indel distance >= ``d_min`` via clique search.

    Vertices are the words of ``Sigma_q^n``; edges join words at distance at
    least ``d_min``. Several cliques of ``target_size`` are collected and ``t``
    of them picked greedily to overlap as little as possible.
    """
    if q**n > 1 << 20:
        raise DesignError("vertex set too large to enumerate")
    words = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)
    V = len(words)
    D = pairwise_indel(words) if V > 1 else np.zeros((1, 1), dtype=np.int64)
    ok = D >= d_min
    np.fill_diagonal(ok, False)
    adj = [0] * V
    for v in range(V):
        nb = np.flatnonzero(ok[v])
        m = 0
        for u in nb:
            m |= 1 << int(u)
        adj[v] = m

    cliques, best = find_cliques(adj, target_size, max_cliques=max_cliques, node_budget=node_budget)
    if not cliques:
        # the colour bound prunes before small cliques are recorded; look for the largest one directly
        for size in range(target_size - 1, len(best), -1):
            found, _ = find_cliques(adj, size, max_cliques=1, node_budget=node_budget)
            if found:
                best = found[0]
                break
        raise CliqueDesignFailure(
            f"no clique of size {target_size} found; largest has {len(best)} words",
            Codebook(words[sorted(best)], q) if best else None,
        )
    # more varied restarts when fewer than t distinct cliques came out
    restart = 0
    while len({frozenset(c) for c in cliques}) < t and restart < V:
        restart += 1
        rot = list(range(restart, V)) + list(range(restart))
        more, _ = find_cliques(adj, target_size, max_cliques=max_cliques, node_budget=node_budget, start_order=rot)
        cliques += more
    uniq = []
    seen = set()
    for c in cliques:
        key = frozenset(c)
        if key not in seen:
            seen.add(key)
            uniq.append(sorted(c))
    chosen = _select_low_overlap(uniq, t)
    if len(chosen) < t:
        chosen += [chosen[i % len(chosen)] for i in range(t - len(chosen))]
    books = [Codebook(words[c], q) for c in chosen]
    for cb in books:
        assert verify_codebook(cb, d_min)[0]
    return books


# ---------------------------------------------------------------------------
# schedules and offsets


def _raw_stream(seed: int, count: int) -> np.ndarray:
    # PCG64 raw output is stable across numpy versions and platforms
    return np.random.PCG64(seed).random_raw(count)


class Schedule:
    """Deterministic map from block position to codebook index."""

    def __init__(self, kind: str, t: int, seed: int = 0):
        if kind not in ("round_robin", "random_no_repeat", "constant"):
            raise ValueError(f"unknown schedule {kind!r}")
        if kind == "random_no_repeat" and t < 2:
            raise ValueError("random_no_repeat needs at least two codebooks")
        self.kind, self.t, self.seed = kind, t, seed
        self._cache = np.zeros(0, dtype=np.int64)

    def indices(self, count: int) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(count, dtype=np.int64)
        if self.kind == "round_robin":
            return np.arange(count, dtype=np.int64) % self.t
        if count > self._cache.size:
            raw = _raw_stream(self.seed, count)
            idx = np.empty(count, dtype=np.int64)
            prev = -1
            for i in range(count):
                if prev < 0:
                    c = int(raw[i] % np.uint64(self.t))
                else:
                    # uniform among the t-1 codebooks other than the previous one
                    c = int(raw[i] % np.uint64(self.t - 1))
                    c += c >= prev
                idx[i] = c
                prev = c
            self._cache = idx
        return self._cache[:count].copy()

    def __call__(self, i: int) -> int:
        return int(self.indices(i + 1)[i])


def tvc_schedule(kind: str, t: int, seed: int = 0) -> Schedule:
    return Schedule(kind, t, seed)


@dataclass(frozen=True)
class OffsetSequence:
    seed: int
    q: int = 4

    def symbols(self, N: int) -> np.ndarray:
        return (_raw_stream(self.seed, N) % np.uint64(self.q)).astype(np.int64)


# ---------------------------------------------------------------------------
# trellis-form inner codes


class InnerCode:
    """Inner code in trellis form.

    Attributes
    ----------
    n, k, q : block length, input bits per section, channel alphabet size
    n_states : number of encoder memory states (``2**nu``)
    m : number of zero-input termination sections appended by the encoder
    next_state : (n_states, 2**k) array
    """

    kind = "abstract"

    def __init__(self, n, k, q, n_states, m, next_state, offset: OffsetSequence | None = None, name=""):
        self.n, self.k, self.q = int(n), int(k), int(q)
        self.n_states, self.m = int(n_states), int(m)
        self.next_state = np.asarray(next_state, dtype=np.int64)
        self.offset = offset
        self.name = name or self.kind

    @property
    def A(self) -> int:
        return 1 << self.k

    @property
    def nu(self) -> int:
        return int(round(math.log2(self.n_states)))

    def n_sections(self, N_o: int) -> int:
        return N_o + self.m

    def channel_length(self, N_o: int) -> int:
        return self.n * (N_o + self.m)

    def rate_bits(self, N_o: int) -> float:
        """Inner rate in bits per channel symbol, ``N_o k / N``."""
        return N_o * self.k / self.channel_length(N_o)

    def _raw_outputs(self, T: int) -> np.ndarray:
        raise NotImplementedError

    def section_outputs(self, N_o: int) -> np.ndarray:
        """(T, S, A, n) channel symbols per section, state and input, offset included."""
        T = self.n_sections(N_o)
        out = self._raw_outputs(T)
        if self.offset is not None:
            off = self.offset.symbols(T * self.n).reshape(T, 1, 1, self.n)
            out = (out + off) % self.q
        return out

    def input_mask(self, N_o: int) -> np.ndarray:
        """(T, A) boolean; termination sections admit only the zero input."""
        T = self.n_sections(N_o)
        mask = np.ones((T, self.A), dtype=bool)
        if self.m:
            mask[N_o:, 1:] = False
        return mask

    def encode(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.int64)
        if w.size and (w.min() < 0 or w.max() >= self.A):
            raise ValueError("outer symbol out of range for this inner code")
        N_o = w.size
        table = self.section_outputs(N_o)
        full = np.concatenate([w, np.zeros(self.m, dtype=np.int64)])
        s = 0
        x = np.empty((full.size, self.n), dtype=np.int64)
        for i, a in enumerate(full):
            x[i] = table[i, s, a]
            s = self.next_state[s, a]
        return x.reshape(-1)

    def strip_offset(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.offset is None:
            return x.copy()
        return (x - self.offset.symbols(x.size)) % self.q

    def __repr__(self):
        return f"{type(self).__name__}({self.name}: [{self.n},{self.k}]_{self.q}, states={self.n_states}, m={self.m})"


class BlockCode(InnerCode):
    """Block code or TVC: position ``i`` uses codebook ``schedule(i)``."""

    kind = "tvc"

    def __init__(self, codebooks: Sequence[Codebook], schedule: Schedule | None = None, offset=None, name=""):
        codebooks = list(codebooks)
        cb0 = codebooks[0]
        for cb in codebooks:
            if cb.size != cb0.size or cb.n != cb0.n:
                raise ValueError("all codebooks need the same size and length")
            if cb.size & (cb.size - 1):
                raise ValueError("codebook size must be a power of two")
        self.codebooks = codebooks
        if schedule is None:
            schedule = Schedule("constant" if len(codebooks) == 1 else "round_robin", len(codebooks))
        self.schedule = schedule
        self._stack = np.stack([cb.words for cb in codebooks])  # (t, A, n)
        super().__init__(cb0.n, cb0.k, cb0.q, 1, 0, np.zeros((1, cb0.size), np.int64), offset, name)
        if len(codebooks) == 1:
            self.kind = "block"

    @property
    def t(self) -> int:
        return len(self.codebooks)

    def _raw_outputs(self, T):
        idx = self.schedule.indices(T)
        return self._stack[idx][:, None, :, :].copy()


def identity_code(q: int = 4) -> BlockCode:
    k = int(math.log2(q))
    if 1 << k != q:
        raise ValueError("identity inner code needs a power-of-two alphabet")
    cb = Codebook(np.arange(q).reshape(q, 1), q)
    return BlockCode([cb], name="identity")


# [5, 7]_8 base code: taps on (current, previous, before-previous) input bits
BASE_GENERATORS = (0o5, 0o7)


def _conv_step(bit: int, state: int, gens=BASE_GENERATORS) -> tuple[int, int]:
    """One step of the rate-1/2 base encoder.

    ``state`` packs (b[t-1], b[t-2]) as ``b[t-1] << 1 | b[t-2]``. Returns the
    quaternary output symbol (first generator's bit as MSB) and the new state.
    """
    reg = bit << 2 | state
    sym = 0
    for g in gens:
        sym = sym << 1 | (bin(reg & g).count("1") & 1)
    return sym, (reg >> 1) & 0b11


class ConvCode(InnerCode):
    """``[5, 7]_8`` convolutional code with ``group`` trellis sections merged.

    One section consumes ``group`` input bits (first in time as MSB) and emits
    ``group`` quaternary symbols, so outer symbols live in GF(2**group).
    """

    kind = "convolutional"

    def __init__(self, group: int = 1, offset=None, name=""):
        if group not in (1, 2, 4):
            raise ValueError("supported section groupings are 1, 2 and 4")
        self.group = group
        A = 1 << group
        nxt = np.zeros((4, A), dtype=np.int64)
        words = np.zeros((4, A, group), dtype=np.int64)
        for s in range(4):
            for a in range(A):
                st = s
                for j in range(group):
                    bit = a >> (group - 1 - j) & 1
                    words[s, a, j], st = _conv_step(bit, st)
                nxt[s, a] = st
        self._words = words
        m = -(-2 // group)  # zero sections needed to flush two memory bits
        super().__init__(group, group, 4, 4, m, nxt, offset, name)

    def _raw_outputs(self, T):
        return np.broadcast_to(self._words, (T,) + self._words.shape).copy()

    def generator_octal(self) -> list[int]:
        """Generators over the register (newest input ... oldest state bit)."""
        g = self.group
        width = g + 2
        gens = []
        for j in range(g):
            for base in BASE_GENERATORS:
                # base taps (b_t, b_t-1, b_t-2) for the j-th input of the group
                mask = 0
                for tap in range(3):
                    if base >> (2 - tap) & 1:
                        pos = (g - 1 - j) + tap  # register position counted from the newest bit
                        mask |= 1 << (width - 1 - pos)
                gens.append(mask)
        return gens


def conv_sections(group: int, offset: OffsetSequence | None = None) -> ConvCode:
    return ConvCode(group, offset=offset, name={1: "CC-0", 2: "CC-1", 4: "CC-2"}[group])


# ---------------------------------------------------------------------------
# the schemes compared in the experiments


SCHEMES = ("CC-1", "CC-2", "WM", "TVC-1", "TVC-2", "identity")


def make_scheme(name: str, offset_seed: int = 1, schedule_seed: int = 2) -> InnerCode:
    off = OffsetSequence(offset_seed, 4)
    if name == "CC-1":
        return ConvCode(2, offset=off, name=name)
    if name == "CC-2":
        return ConvCode(4, offset=off, name=name)
    if name == "WM":
        return BlockCode([dm_construct(4, 4, 4)], offset=off, name=name)
    if name == "TVC-1":
        return BlockCode(tvc_codebooks(), Schedule("random_no_repeat", 4, schedule_seed), name=name)
    if name == "TVC-2":
        return BlockCode(tvc_codebooks(), Schedule("round_robin", 4), offset=off, name=name)
    if name == "identity":
        return identity_code(4)
    raise ValueError(f"unknown inner scheme {name!r}; choose from {SCHEMES}")


def encode_inner(w, code: InnerCode) -> np.ndarray:
    return code.encode(w)
