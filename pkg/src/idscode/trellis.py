"""Drift-augmented trellis: lattice branch metrics and single-read BCJR.

The hidden state before section ``i`` is ``(s, d)``: the inner encoder state
and the drift (insertions minus deletions so far). A section emits ``n``
channel symbols which the IDS channel turns into ``mu`` received symbols,
``0 <= mu <= n*(I_max+1)``; the probability of each such segment is the
lattice value computed by :func:`lattice_forward`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelParams
from .inner import InnerCode

I_MAX_DEFAULT = 2
SIGMA_SCALES = (5.0, 10.0)


@dataclass(frozen=True)
class DriftBounds:
    d_min: int
    d_max: int
    I_max: int
    n: int

    def __post_init__(self):
        if self.d_min > 0 or self.d_max < 0:
            raise ValueError("drift window must contain 0")

    @property
    def Delta(self) -> int:
        return self.d_max - self.d_min + 1

    @property
    def delta(self) -> int:
        return self.n * (self.I_max + 1) + 1

    def contains(self, d: int) -> bool:
        return self.d_min <= d <= self.d_max

    @classmethod
    def dynamic(cls, N: int, params: ChannelParams, n: int, I_max: int = I_MAX_DEFAULT, scale: float = 5.0):
        """Symmetric window of ``ceil(scale * sigma)`` around zero.

        ``sigma`` is the standard deviation of the final drift for a length-N
        input, ``sqrt(N p / (1 - p))`` with ``p`` the larger of the insertion
        and deletion probabilities.
        """
        p = max(params.p_ins, params.p_del)
        sigma = math.sqrt(N * p / (1.0 - p)) if p < 1 else float(N)
        w = math.ceil(scale * sigma)
        return cls(-min(w, N), min(w, N * I_max), I_max, n)


@dataclass
class TrellisResult:
    app: np.ndarray  # (N_o + m, 2**k), rows sum to one
    log_py: float  # natural log of p(y) from the forward pass
    log_py_backward: float
    erased: bool
    bounds: DriftBounds | None
    edges: int = 0
    extra: dict = field(default_factory=dict)


def lattice_forward(x_block, y_segment, params: ChannelParams, I_max: int | None = None) -> float:
    """Probability that block ``x_block`` is received exactly as ``y_segment``.

    Insertions may precede every symbol of the block but not follow the last
    one (those belong to the next block).
    """
    x = np.asarray(x_block, dtype=np.int64).reshape(1, 1, -1)
    y = np.asarray(y_segment, dtype=np.int64)
    n, mu = x.shape[2], y.size
    if I_max is not None and mu > n * (I_max + 1):
        raise ValueError(f"segment of {mu} symbols exceeds n*(I_max+1) = {n * (I_max + 1)}")
    G = kernels.gamma_all(x, y, n, 0, 1, mu + 1, params.lattice_weights())
    return float(G[0, 0, 0, mu])


# ---------------------------------------------------------------------------
# helpers shared with the multi-read decoders


def section_tables(code: InnerCode, N_o: int):
    """Codewords ``(T, S*A, n)`` and the index ``(T, S, A)`` into them."""
    out = code.section_outputs(N_o)
    T, S, A, n = out.shape
    cws = out.reshape(T, S * A, n)
    idx = np.broadcast_to(np.arange(S * A).reshape(1, S, A), (T, S, A)).copy()
    return cws, idx


def prepare_priors(code: InnerCode, N_o: int, priors=None) -> np.ndarray:
    """Normalised (T, A) priors with termination sections pinned to zero input."""
    T, A = code.n_sections(N_o), code.A
    P = np.ones((T, A))
    if priors is not None:
        pr = np.asarray(priors, dtype=float)
        if pr.shape[1] != A or pr.shape[0] not in (N_o, T):
            raise ValueError(f"priors must have shape ({N_o}, {A})")
        if (pr < 0).any():
            raise ValueError("priors must be nonnegative")
        P[: pr.shape[0]] = pr
    P *= code.input_mask(N_o)
    s = P.sum(axis=1, keepdims=True)
    if (s <= 0).any():
        raise ValueError("a prior row has no mass on admissible inputs")
    return P / s


def count_edges(code: InnerCode, N_o: int, bounds: DriftBounds) -> int:
    """Enumerated (state, input, drift, segment length) edges of the trellis."""
    mask = code.input_mask(N_o)
    return int(mask.sum()) * code.n_states * bounds.Delta * bounds.delta


def section_metrics(y, code: InnerCode, N_o: int, params: ChannelParams, bounds: DriftBounds) -> np.ndarray:
    """Lattice values ``G[t, c, j, mu]`` for drift ``bounds.d_min + j``."""
    cws, _ = section_tables(code, N_o)
    return kernels.gamma_all(cws, np.asarray(y, dtype=np.int64), code.n, bounds.d_min, bounds.Delta, bounds.delta, params.lattice_weights())


def bounds_for(final_drifts, N: int, params: ChannelParams, n: int, I_max: int = I_MAX_DEFAULT, bounds=None):
    """Pick a drift window covering every final drift, widening 5 sigma to 10 sigma.

    Returns ``None`` when even the widest window misses a read (frame erasure).
    """
    candidates = [bounds] if bounds is not None else [DriftBounds.dynamic(N, params, n, I_max, sc) for sc in SIGMA_SCALES]
    for b in candidates:
        if all(b.contains(d) for d in final_drifts):
            return b
    return None


def _erasure(code, N_o, bounds):
    T, A = code.n_sections(N_o), code.A
    app = np.full((T, A), 1.0 / A)
    return TrellisResult(app, -math.inf, -math.inf, True, bounds)


def decode_single(
    y,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
) -> TrellisResult:
    """Symbolwise APPs ``p(w_i | y)`` for one read."""
    y = np.asarray(y, dtype=np.int64)
    N = code.channel_length(N_o)
    drift = y.size - N
    b = bounds_for([drift], N, params, code.n, I_max, bounds)
    if b is None:
        return _erasure(code, N_o, bounds)
    prior = prepare_priors(code, N_o, priors)
    G = section_metrics(y, code, N_o, params, b)
    _, idx = section_tables(code, N_o)
    app, lf, lb, ok = kernels.forward_backward(G, idx, code.next_state, prior, code.n, -b.d_min, 0, drift - b.d_min)
    if not ok:
        res = _erasure(code, N_o, b)
        res.edges = count_edges(code, N_o, b)
        return res
    app = app / app.sum(axis=1, keepdims=True)
    return TrellisResult(app, lf, lb, False, b, count_edges(code, N_o, b))


def decode_single_extrinsic(y, code, params, N_o, priors=None, bounds=None, I_max=I_MAX_DEFAULT) -> TrellisResult:
    """Like :func:`decode_single` but ``app`` holds APP / prior, renormalised."""
    res = decode_single(y, code, params, N_o, priors, bounds, I_max)
    prior = prepare_priors(code, N_o, priors)
    res.extra["full_app"] = res.app
    if not res.erased:
        res.app = extrinsic(res.app, prior)
    return res


def extrinsic(app, prior) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(prior > 0, app / prior, 0.0)
    s = e.sum(axis=1, keepdims=True)
    A = e.shape[1]
    return np.where(s > 0, e / np.where(s > 0, s, 1), 1.0 / A)


def log_likelihood(
    y,
    code: InnerCode,
    params: ChannelParams,
    N_o: int,
    priors=None,
    bounds: DriftBounds | None = None,
    I_max: int = I_MAX_DEFAULT,
):
    """Forward-only ``log p(y)`` under ``priors``; ``None`` when out of bounds."""
    y = np.asarray(y, dtype=np.int64)
    N = code.channel_length(N_o)
    b = bounds_for([y.size - N], N, params, code.n, I_max, bounds)
    if b is None:
        return None
    prior = prepare_priors(code, N_o, priors)
    G = section_metrics(y, code, N_o, params, b)
    _, idx = section_tables(code, N_o)
    return kernels.forward_only(G, idx, code.next_state, prior, code.n, -b.d_min, 0, y.size - N - b.d_min)


def app_pool(code: InnerCode, params: ChannelParams, N_o: int, frames: int, rng: np.random.Generator, I_max: int = I_MAX_DEFAULT):
    """Single-read APP rows with their true symbols, from random uniform frames.

    Erased frames are skipped. Returns ``(apps, truth)`` of shapes (K, A), (K,).
    """
    from .channel import transmit

    apps, truth = [], []
    for _ in range(frames):
        w = rng.integers(0, code.A, size=N_o)
        y = transmit(code.encode(w), params, rng)
        res = decode_single(y, code, params, N_o, I_max=I_max)
        if res.erased:
            continue
        apps.append(res.app[:N_o])
        truth.append(w)
    if not apps:
        return np.zeros((0, code.A)), np.zeros(0, dtype=np.int64)
    return np.concatenate(apps), np.concatenate(truth)
