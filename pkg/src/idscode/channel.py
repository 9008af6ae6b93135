"""State-based insertion/deletion/substitution (IDS) channel.

Each queued input symbol first sees a geometric number of insertions of
uniformly random symbols, then is either deleted or transmitted (and possibly
substituted by one of the ``q - 1`` other symbols). Nothing is inserted after
the last input symbol leaves the queue.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# event codes used in traces
INS, DEL, TRN, SUB = "I", "D", "T", "S"


@dataclass(frozen=True)
class ChannelParams:
    p_ins: float = 0.0
    p_del: float = 0.0
    p_sub: float = 0.0
    q: int = 4

    def __post_init__(self):
        for name in ("p_ins", "p_del", "p_sub"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.p_ins + self.p_del > 1.0 + 1e-15:
            raise ValueError("p_ins + p_del must not exceed 1")
        if self.p_ins >= 1.0:
            raise ValueError("p_ins = 1 never terminates")
        if self.q < 2:
            raise ValueError("alphabet needs at least two symbols")

    @property
    def p_tr(self) -> float:
        return max(0.0, 1.0 - self.p_ins - self.p_del)

    @classmethod
    def symmetric(cls, p: float, p_sub: float = 0.0, q: int = 4) -> "ChannelParams":
        """``p_ins = p_del = p``, the setting used throughout the experiments."""
        return cls(p_ins=p, p_del=p, p_sub=p_sub, q=q)

    def lattice_weights(self) -> tuple[float, float, float, float]:
        """(insert-and-emit, delete, transmit-match, transmit-mismatch) weights."""
        q = self.q
        return (
            self.p_ins / q,
            self.p_del,
            self.p_tr * (1.0 - self.p_sub),
            self.p_tr * self.p_sub / (q - 1),
        )


@dataclass
class ReadSet:
    reads: list[np.ndarray]
    source_length: int
    traces: list[list] | None = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return len(self.reads)

    def final_drifts(self) -> list[int]:
        return [len(r) - self.source_length for r in self.reads]


def _substitute(x: np.ndarray, rng: np.random.Generator, q: int) -> np.ndarray:
    # uniform over the q-1 symbols different from x
    return (x + rng.integers(1, q, size=x.shape)) % q


def transmit(
    x,
    params: ChannelParams,
    rng: np.random.Generator,
    record: bool = False,
):
    """Pass ``x`` through the IDS channel once.

    Returns the received sequence, or ``(y, trace)`` when ``record`` is set.
    The trace is a list of ``(event, input_index, output_symbol)`` tuples,
    ``output_symbol`` being ``None`` for deletions.
    """
    x = np.asarray(x, dtype=np.int64)
    q = params.q
    if x.size and (x.min() < 0 or x.max() >= q):
        raise ValueError("input symbol outside the channel alphabet")
    N = x.size
    p_i, p_d = params.p_ins, params.p_del
    n_ins = rng.geometric(1.0 - p_i, size=N) - 1 if p_i > 0 else np.zeros(N, np.int64)
    # after the insertions, the symbol leaves by deletion or transmission
    p_leave_del = p_d / (1.0 - p_i) if p_i < 1 else 0.0
    deleted = rng.random(N) < p_leave_del
    subst = rng.random(N) < params.p_sub
    sent = x.copy()
    if subst.any():
        sent[subst] = _substitute(x[subst], rng, q)
    total_ins = int(n_ins.sum())
    ins_sym = rng.integers(0, q, size=total_ins)

    # assemble the output: insertions for symbol i, then symbol i unless deleted
    keep = ~deleted
    counts = n_ins + keep
    y = np.empty(int(counts.sum()), dtype=np.int64)
    ends = np.cumsum(counts)
    # positions of transmitted symbols are the last slot of their group
    y[(ends - 1)[keep]] = sent[keep]
    if total_ins:
        ins_mask = np.ones(y.size, dtype=bool)
        ins_mask[(ends - 1)[keep]] = False
        y[ins_mask] = ins_sym
    if not record:
        return y

    trace = []
    k = 0
    for i in range(N):
        for _ in range(int(n_ins[i])):
            trace.append((INS, i, int(ins_sym[k])))
            k += 1
        if deleted[i]:
            trace.append((DEL, i, None))
        elif subst[i]:
            trace.append((SUB, i, int(sent[i])))
        else:
            trace.append((TRN, i, int(sent[i])))
    return y, trace


def transmit_bernoulli(x, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Reference sampler that walks the state machine one Bernoulli step at a time."""
    q = params.q
    out = []
    for xi in np.asarray(x, dtype=np.int64):
        while True:
            u = rng.random()
            if u < params.p_ins:
                out.append(int(rng.integers(0, q)))
                continue
            if u < params.p_ins + params.p_del:
                break
            if rng.random() < params.p_sub:
                out.append(int((xi + rng.integers(1, q)) % q))
            else:
                out.append(int(xi))
            break
    return np.asarray(out, dtype=np.int64)


def transmit_multi(
    x,
    params: ChannelParams,
    M: int,
    rng: np.random.Generator,
    record: bool = False,
) -> ReadSet:
    """``M`` independent reads of the same strand."""
    if M < 1:
        raise ValueError("need at least one read")
    x = np.asarray(x, dtype=np.int64)
    reads, traces = [], []
    for _ in range(M):
        if record:
            y, tr = transmit(x, params, rng, record=True)
            traces.append(tr)
        else:
            y = transmit(x, params, rng)
        reads.append(y)
    return ReadSet(reads=reads, source_length=int(x.size), traces=traces if record else None)


def trace_output(trace) -> list[int]:
    return [sym for ev, _, sym in trace if ev != DEL]


def trace_drift(trace, N: int) -> np.ndarray:
    """Drift before each input symbol is enqueued (length ``N + 1``)."""
    drift = np.zeros(N + 1, dtype=np.int64)
    d = 0
    i_cur = 0
    for ev, i, _ in trace:
        while i_cur < i:
            i_cur += 1
            drift[i_cur] = d
        if ev == INS:
            d += 1
        elif ev == DEL:
            d -= 1
    while i_cur < N:
        i_cur += 1
        drift[i_cur] = d
    return drift
