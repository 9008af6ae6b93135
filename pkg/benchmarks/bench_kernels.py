"""Time the compiled trellis kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--N_o 256] [--p 0.05] [--repeat 5]

Both backends run on the same received sequence; the script also checks
that they agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from idscode import _fallback
from idscode.channel import ChannelParams, transmit
from idscode.inner import make_scheme
from idscode.trellis import DriftBounds, prepare_priors, section_tables

try:
    from idscode import _kernels
except ImportError:  # extension not built
    _kernels = None


def setup(N_o: int, p: float, scheme: str, seed: int):
    code = make_scheme(scheme)
    params = ChannelParams.symmetric(p)
    rng = np.random.default_rng(seed)
    w = rng.integers(0, code.A, size=N_o)
    y = transmit(code.encode(w), params, rng)
    N = code.channel_length(N_o)
    b = DriftBounds.dynamic(N, params, code.n)
    cws, idx = section_tables(code, N_o)
    prior = prepare_priors(code, N_o)
    drift = y.size - N
    return dict(code=code, params=params, y=y, b=b, cws=cws, idx=idx, prior=prior, drift=drift)


def run(mod, s):
    b, code = s["b"], s["code"]
    G = mod.gamma_all(s["cws"], s["y"], code.n, b.d_min, b.Delta, b.delta, s["params"].lattice_weights())
    return mod.forward_backward(G, s["idx"], code.next_state, s["prior"], code.n, -b.d_min, 0, s["drift"] - b.d_min)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N_o", type=int, default=256)
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--scheme", default="CC-2")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    s = setup(args.N_o, args.p, args.scheme, args.seed)
    print(f"scheme={args.scheme} N_o={args.N_o} p={args.p} Delta={s['b'].Delta} delta={s['b'].delta}")
    backends = [("numpy", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    times = {}
    for name, mod in backends:
        run(mod, s)  # warm-up
        t = min(timeit.repeat(lambda: run(mod, s), number=1, repeat=args.repeat))
        times[name] = t
        print(f"{name:>7}: {t * 1e3:9.2f} ms per decode")
    if _kernels is None:
        print("compiled extension not available; build with: pip install --no-build-isolation -e .")
        return
    a_np = run(_fallback, s)[0]
    a_cy = run(_kernels, s)[0]
    a_np = a_np / a_np.sum(axis=1, keepdims=True)
    a_cy = a_cy / a_cy.sum(axis=1, keepdims=True)
    print(f"max |APP difference| = {np.abs(a_np - a_cy).max():.3e}")
    print(f"speed-up: {times['numpy'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
