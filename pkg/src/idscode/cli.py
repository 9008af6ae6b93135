"""Command-line harness: FER and rate sweeps, design commands, channel samples.

Every sweep is deterministic given the master seed. Trial ``i`` at the
``g``-th channel parameter draws from ``SeedSequence([seed, g, i])``, so
serial and pooled runs (``IDSCODE_WORKERS``) give identical counts and
identical CSV bytes.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import functools
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import air, inner, ldpc, polar
from .channel import ChannelParams, transmit, transmit_multi
from .multiseq import CapacityError, decode_joint, decode_separate
from .trellis import I_MAX_DEFAULT, app_pool, decode_single, extrinsic

WORKERS_ENV = "IDSCODE_WORKERS"
FER_COLUMNS = ["p", "M", "mode", "frames", "frame_errors", "FER", "wallclock", "config_hash"]
AIR_COLUMNS = ["p", "M", "estimator", "bits_per_use", "stderr", "frames", "config_hash"]

DEFAULTS = {
    "p": "0.0",
    "p_sub": "0.0",
    "inner": "CC-1",
    "outer": "polar",
    "M": "1",
    "mode": "separate",
    "turbo": "0",
    "turbo_feedback": "extrinsic",
    "frames": "1000",
    "max_errors": "100",
    "seed": "1",
    "N_o": "64",
    "I_max": str(I_MAX_DEFAULT),
    "offset_seed": "1",
    "schedule_seed": "2",
    # polar outer
    "frozen": "",
    "K": "32",
    "alpha": "3",
    "list_size": "32",
    "crc_bits": "8",
    # ldpc outer
    "parity_check": "",
    "protograph": "designed",
    "lift_seed": "7",
    "bp_iters": "100",
    "transform": "wht",
    # air
    "estimators": "bcjr_once,mutual_info",
    "air_mode": "separate",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None, overrides: dict[str, str]) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if path:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep key case (N_o, M, K)
        if not cp.read(path):
            raise UsageError(f"cannot read config file {path}")
        from_file = {k: v for section in cp.sections() for k, v in cp[section].items()}
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
        cfg.update(from_file)
    unknown = set(overrides) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _floats(s: str) -> list[float]:
    return [float(v) for v in str(s).split(",") if v.strip()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in str(s).split(",") if v.strip()]


def _words(s: str) -> list[str]:
    return [v.strip() for v in str(s).split(",") if v.strip()]


def _params(p: float, cfg) -> ChannelParams:
    return ChannelParams(p, p, float(cfg["p_sub"]), 4)


def _trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, trial]))


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# concatenated system


@functools.lru_cache(maxsize=8)
def _system(cfg_json: str):
    cfg = json.loads(cfg_json)
    code = inner.make_scheme(cfg["inner"], int(cfg["offset_seed"]), int(cfg["schedule_seed"]))
    if cfg["turbo_feedback"] not in ("extrinsic", "full"):
        raise UsageError("turbo_feedback must be 'extrinsic' or 'full'")
    outer = cfg["outer"]
    if outer == "polar":
        if cfg["frozen"]:
            spec = polar.read_frozen(cfg["frozen"], int(cfg["list_size"]))
        else:
            spec = polar.read_frozen(polar.DATA_DIR / "polar_cc1_64_32_q4.txt", int(cfg["list_size"]))
        if spec.q != code.A:
            raise UsageError(f"polar alphabet {spec.q} does not match inner input alphabet {code.A}")
        return code, ("polar", spec), spec.N_o
    if outer == "ldpc":
        if cfg["parity_check"]:
            H = ldpc.read_parity_check(cfg["parity_check"])
        else:
            proto = _protograph(cfg["protograph"])
            N_o = int(cfg["N_o"])
            if N_o % proto.n_p:
                raise UsageError(f"N_o={N_o} is not a multiple of the protograph width {proto.n_p}")
            H = ldpc.lift(proto, N_o // proto.n_p, np.random.default_rng(int(cfg["lift_seed"])), q=code.A)
        if H.q != code.A:
            raise UsageError(f"LDPC field size {H.q} does not match inner input alphabet {code.A}")
        return code, ("ldpc", (H, ldpc.LdpcEncoder(H))), H.cols
    if outer == "none":
        return code, ("none", None), int(cfg["N_o"])
    raise UsageError(f"unknown outer scheme {outer!r}")


def _protograph(name: str) -> ldpc.Protograph:
    if name == "designed":
        return ldpc.designed_protograph()
    if name == "regular":
        return ldpc.regular_protograph()
    return ldpc.read_protograph(name)


def _inner_decode(reads, code, params, N_o, mode, priors, I_max):
    if mode == "joint":
        return decode_joint(reads, code, params, N_o, priors=priors, I_max=I_max)
    if reads.M == 1 or mode == "single":
        return decode_single(reads.reads[0], code, params, N_o, priors=priors, I_max=I_max)
    return decode_separate(reads, code, params, N_o, priors=priors, I_max=I_max)


def fer_trial(cfg_json: str, p: float, M: int, mode: str, point: int, trial: int) -> bool:
    """One frame; returns True on a frame error."""
    cfg = json.loads(cfg_json)
    code, (kind, outer), N_o = _system(cfg_json)
    rng = _trial_rng(int(cfg["seed"]), point, trial)
    params = _params(p, cfg)
    I_max = int(cfg["I_max"])
    if kind == "polar":
        info = rng.integers(0, outer.q, size=outer.K)
        w = polar.polar_encode_info(info, outer)
    elif kind == "ldpc":
        H, enc = outer
        info = rng.integers(0, H.q, size=enc.dimension)
        w = enc.encode(info)
    else:
        info = w = rng.integers(0, code.A, size=N_o)
    reads = transmit_multi(code.encode(w), params, M, rng)
    res = _inner_decode(reads, code, params, N_o, mode, None, I_max)
    app = res.app[:N_o]
    if kind == "polar":
        out = polar.decode_scl(app, outer)
        return not np.array_equal(out.info, info)
    if kind == "ldpc":
        H, enc = outer
        iters = int(cfg["bp_iters"])
        bp = ldpc.decode_bp(app, H, iters, cfg["transform"])
        full = cfg["turbo_feedback"] == "full"
        for _ in range(int(cfg["turbo"])):
            if bp.converged:
                break
            prior = bp.posterior if full else extrinsic(bp.posterior, app)
            res = _inner_decode(reads, code, params, N_o, mode, prior, I_max)
            app = res.app[:N_o] if full else extrinsic(res.app[:N_o], prior)
            bp = ldpc.decode_bp(app, H, iters, cfg["transform"])
        return not np.array_equal(enc.extract(bp.word), info)
    return not np.array_equal(app.argmax(axis=1), w)


def _ordered_map(fn, args_list, pool):
    if pool is None:
        return map(lambda a: fn(*a), args_list)
    return pool.map(fn, *zip(*args_list))


def run_fer(cfg: dict, pool=None, timing: bool = False) -> list[dict]:
    cfg_json = json.dumps(cfg, sort_keys=True)
    _system(cfg_json)  # surface configuration errors before any work
    h = config_hash(cfg)
    frames, max_err = int(cfg["frames"]), int(cfg["max_errors"])
    chunk = 64 if pool is None else 64 * _workers()
    rows = []
    # frames depend on (seed, p index, trial) only, so rows that differ in M or
    # mode see the same messages and the same first reads
    for point, p in enumerate(_floats(cfg["p"])):
        for M in _ints(cfg["M"]):
            for mode in _words(cfg["mode"]):
                t0 = time.perf_counter()
                done = errors = 0
                note = ""
                try:
                    while done < frames and errors < max_err:
                        batch = [(cfg_json, p, M, mode, point, i) for i in range(done, min(done + chunk, frames))]
                        for e in _ordered_map(fer_trial, batch, pool):
                            done += 1
                            errors += bool(e)
                            if errors >= max_err:
                                break
                except CapacityError as exc:
                    note = f"capacity: {exc}"
                wall = f"{time.perf_counter() - t0:.3f}" if timing else ""
                fer = f"{errors / done:.6g}" if done else "nan"
                rows.append(dict(p=p, M=M, mode=mode, frames=done, frame_errors=errors, FER=fer if not note else note, wallclock=wall, config_hash=h))
    return rows


def air_trial(cfg_json: str, estimator: str, p: float, M: int, point: int, trial: int):
    cfg = json.loads(cfg_json)
    code = inner.make_scheme(cfg["inner"], int(cfg["offset_seed"]), int(cfg["schedule_seed"]))
    rng = _trial_rng(int(cfg["seed"]), point, trial)
    params = _params(p, cfg)
    N_o, I_max = int(cfg["N_o"]), int(cfg["I_max"])
    if estimator == "bcjr_once":
        r = air.bcjr_once_rate(code, params, M, N_o, 1, rng, cfg["air_mode"], I_max)
    elif estimator == "mutual_info":
        r = air.mutual_info_rate(code, params, M, N_o, 1, rng, I_max)
    elif estimator == "uncoded_mi":
        r = air.uncoded_mi_rate(params, M, N_o, 1, rng)
    else:
        raise UsageError(f"unknown estimator {estimator!r}")
    return r.per_frame, r.erased


def run_air(cfg: dict, pool=None) -> list[dict]:
    cfg_json = json.dumps(cfg, sort_keys=True)
    h = config_hash(cfg)
    frames = int(cfg["frames"])
    rows = []
    for point, p in enumerate(_floats(cfg["p"])):
        for M in _ints(cfg["M"]):
            for est in _words(cfg["estimators"]):
                vals = []
                for pf, _ in _ordered_map(air_trial, [(cfg_json, est, p, M, point, i) for i in range(frames)], pool):
                    vals.extend(pf)
                v = np.asarray(vals)
                mean = float(v.mean()) if v.size else float("nan")
                se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
                rows.append(dict(p=p, M=M, estimator=est, bits_per_use=f"{mean:.6f}", stderr=f"{se:.6f}", frames=v.size, config_hash=h))
    return rows


def write_csv(rows, columns, out) -> None:
    w = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def _emit(rows, columns, path):
    if path in (None, "-"):
        write_csv(rows, columns, sys.stdout)
    else:
        with open(path, "w", newline="") as f:
            write_csv(rows, columns, f)


# ---------------------------------------------------------------------------
# design


def design_tvc(args) -> None:
    cbs = inner.clique_design(args.n, args.q, args.dmin, args.size, t=args.t)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, cb in enumerate(cbs):
        ok, bad = inner.verify_codebook(cb, args.dmin)
        if not ok:
            raise RuntimeError(f"codebook {i} violates d_min: {bad}")
        inner.write_codebooks(out / f"codebook_{i}.txt", [cb], args.dmin)
    inner.write_codebooks(out / "codebooks.txt", cbs, args.dmin)


def _pool_for(args, p):
    code = inner.make_scheme(args.inner)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
    return app_pool(code, ChannelParams.symmetric(p), args.N_o, args.frames, rng)


def design_polar_kernel(args) -> list[polar.KernelScore]:
    apps, truth = _pool_for(args, args.p)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    scores = polar.optimize_kernel(apps, truth, args.samples, rng)
    with _open_out(args.out) as f:
        f.write("rank,ratio,failure,stderr\n")
        for i, s in enumerate(scores):
            f.write(f"{i + 1},{s.ratio},{s.failure:.6g},{s.stderr:.3g}\n")
    return scores


def design_polar_frozen(args) -> None:
    code = inner.make_scheme(args.inner)
    params = ChannelParams.symmetric(args.p)
    spec = polar.PolarSpec(args.N_o, args.K, code.A, args.alpha, crc_bits=args.crc_bits)

    def source(w, rng):
        y = transmit(code.encode(w), params, rng)
        res = decode_single(y, code, params, args.N_o)
        return None if res.erased else res.app[: args.N_o]

    rng = np.random.default_rng(args.seed)
    spec, _ = polar.select_frozen(spec, source, args.frames, rng)
    with _open_out(args.out) as f:
        f.write(polar.format_frozen(spec))


def design_ldpc_threshold(args) -> ldpc.ThresholdEstimate:
    code = inner.make_scheme(args.inner)
    proto = _protograph(args.protograph)

    def pool_fn(p):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, int(round(p * 1e6))]))
        return app_pool(code, ChannelParams.symmetric(p), args.N_o, args.frames, rng)

    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    est = ldpc.estimate_threshold(proto, pool_fn, rng, args.lo, args.hi, args.steps, args.pop, args.max_iter)
    with _open_out(args.out) as f:
        f.write(f"threshold {est.p_th:.6f}\nbracket {est.bracket[0]:.6f} {est.bracket[1]:.6f}\n")
        for p, ok, err in est.probes:
            f.write(f"probe {p:.6f} {'converged' if ok else 'failed'} {err:.6g}\n")
        if est.wide:
            f.write("note: some probes used fewer APP samples than requested\n")
    return est


class _open_out:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.f = io.StringIO()
        else:
            self.f = open(self.path, "w")
        return self.f

    def __exit__(self, *exc):
        if self.path in (None, "-"):
            sys.stdout.write(self.f.getvalue())
        else:
            self.f.close()


def channel_sample(args) -> None:
    params = ChannelParams(args.p, args.p if args.p_del is None else args.p_del, args.p_sub, args.q)
    rng = np.random.default_rng(args.seed)
    x = rng.integers(0, args.q, size=args.N)
    reads = transmit_multi(x, params, args.M, rng)
    print("kind,index,symbols")
    print("input,0," + "".join(map(str, x)))
    for j, y in enumerate(reads.reads):
        print(f"read,{j}," + "".join(map(str, y)))


# ---------------------------------------------------------------------------
# argument parsing


def _add_sweep_flags(sp):
    sp.add_argument("-c", "--config", help="INI file; every key of every section is read")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--p", help="comma-separated p_ins = p_del grid")
    sp.add_argument("--M", help="comma-separated read counts")
    sp.add_argument("--inner", choices=inner.SCHEMES)
    sp.add_argument("--frames", help="frames per grid point")
    sp.add_argument("--seed", help="master seed")
    sp.add_argument("-o", "--out", default="-", help="CSV path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idscode", description="Concatenated coding for IDS channels with multiple reads.")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fer", help="frame error rate sweep")
    _add_sweep_flags(f)
    f.add_argument("--outer", choices=["polar", "ldpc", "none"])
    f.add_argument("--mode", help="comma-separated decoding modes: single, separate, joint")
    f.add_argument("--turbo", help="inner-outer iterations (LDPC outer only)")
    f.add_argument("--timing", action="store_true", help="fill the wallclock column")

    a = sub.add_parser("air", help="achievable information rate sweep")
    _add_sweep_flags(a)
    a.add_argument("--estimators", help="comma-separated: bcjr_once, mutual_info, uncoded_mi")
    a.add_argument("--N_o", help="outer symbols per frame")

    d = sub.add_parser("design", help="code design procedures")
    dsub = d.add_subparsers(dest="what", required=True)
    t = dsub.add_parser("tvc", help="clique-search codebooks")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--q", type=int, required=True)
    t.add_argument("--dmin", type=int, required=True)
    t.add_argument("--size", type=int, required=True)
    t.add_argument("--t", type=int, default=1)
    t.add_argument("--out", required=True, help="output directory")

    for name, hlp in (("polar-kernel", "rank kernel ratios"), ("polar-frozen", "genie-aided frozen set"), ("ldpc-threshold", "density-evolution threshold")):
        s = dsub.add_parser(name, help=hlp)
        s.add_argument("--inner", choices=inner.SCHEMES, default={"polar-kernel": "CC-2", "polar-frozen": "CC-1", "ldpc-threshold": "TVC-2"}[name])
        s.add_argument("--seed", type=int, default=1)
        s.add_argument("--out", default="-")
        if name == "polar-kernel":
            s.add_argument("--p", type=float, default=0.04)
            s.add_argument("--N_o", type=int, default=256)
            s.add_argument("--frames", type=int, default=400)
            s.add_argument("--samples", type=int, default=100_000)
        elif name == "polar-frozen":
            s.add_argument("--p", type=float, required=True)
            s.add_argument("--N_o", type=int, default=64)
            s.add_argument("--K", type=int, default=32)
            s.add_argument("--alpha", type=int, default=3)
            s.add_argument("--crc-bits", type=int, default=8)
            s.add_argument("--frames", type=int, default=2000)
        else:
            s.add_argument("--protograph", default="designed", help="designed, regular, or a file path")
            s.add_argument("--N_o", type=int, default=240)
            s.add_argument("--frames", type=int, default=100)
            s.add_argument("--lo", type=float, default=0.0)
            s.add_argument("--hi", type=float, default=0.3)
            s.add_argument("--steps", type=int, default=8)
            s.add_argument("--pop", type=int, default=4000)
            s.add_argument("--max-iter", type=int, default=100)

    c = sub.add_parser("channel-sample", help="draw an input and its reads")
    c.add_argument("--p", type=float, required=True, help="insertion probability (and deletion unless --p-del)")
    c.add_argument("--p-del", type=float)
    c.add_argument("--p-sub", type=float, default=0.0)
    c.add_argument("--q", type=int, default=4)
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--M", type=int, default=1)
    c.add_argument("--seed", type=int, default=1)
    return ap


def _overrides(args, keys) -> dict[str, str]:
    ov = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        ov[k.strip()] = v.strip()
    for k in keys:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            ov[k] = str(v)
    return ov


def _run_sweep(fn, cfg, **kw):
    n = _workers()
    if n == 1:
        return fn(cfg, None, **kw)
    with ProcessPoolExecutor(n) as pool:
        return fn(cfg, pool, **kw)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "fer":
            cfg = load_config(args.config, _overrides(args, ["p", "M", "inner", "frames", "seed", "outer", "mode", "turbo"]))
            rows = _run_sweep(run_fer, cfg, timing=args.timing)
            _emit(rows, FER_COLUMNS, args.out)
        elif args.command == "air":
            cfg = load_config(args.config, _overrides(args, ["p", "M", "inner", "frames", "seed", "estimators", "N_o"]))
            rows = _run_sweep(run_air, cfg)
            _emit(rows, AIR_COLUMNS, args.out)
        elif args.command == "design":
            {"tvc": design_tvc, "polar-kernel": design_polar_kernel, "polar-frozen": design_polar_frozen, "ldpc-threshold": design_ldpc_threshold}[args.what](args)
        else:
            channel_sample(args)
    except UsageError as e:
        print(f"idscode: usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - any runtime failure maps to exit status 1
        print(f"idscode: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
