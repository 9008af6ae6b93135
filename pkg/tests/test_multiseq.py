import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idscode.channel import ChannelParams, ReadSet, transmit_multi
from idscode.inner import ConvCode, make_scheme
from idscode.multiseq import (
    CapacityError,
    check_budget,
    combine_separate,
    complexity_for,
    complexity_of,
    decode_joint,
    decode_joint_reference,
    decode_separate,
    joint_log_likelihood,
)
from idscode.trellis import DriftBounds, decode_single
from oracles import brute_force_app


def test_joint_with_memory_matches_brute_force():
    rng = np.random.default_rng(31)
    code = ConvCode(1)
    b = DriftBounds(-4, 5, 4, 1)
    for _ in range(15):
        P = ChannelParams(*rng.uniform(0.03, 0.25, size=2), rng.uniform(0, 0.2), 4)
        ys = [rng.integers(0, 4, size=int(rng.integers(1, 6))) for _ in range(2)]
        ref, _ = brute_force_app(code, ys, P, 2)
        res = decode_joint(ys, code, P, 2, bounds=b)
        np.testing.assert_allclose(res.app[:2], ref, atol=1e-10)


def test_joint_likelihood_matches_brute_force():
    rng = np.random.default_rng(32)
    code = ConvCode(1)
    b = DriftBounds(-4, 5, 4, 1)
    P = ChannelParams(0.1, 0.15, 0.05, 4)
    ys = [np.array([0, 3, 1]), np.array([0, 3, 3, 1])]
    _, _ = brute_force_app(code, ys, P, 2)
    # p(y1, y2) = mean over w of p(y1|w) p(y2|w)
    from itertools import product

    from oracles import trace_probability

    total = 0.0
    for w in product(range(2), repeat=2):
        x = code.encode(np.array(w))
        total += np.prod([trace_probability(x, y, P.p_ins, P.p_del, P.p_sub, 4) for y in ys]) / 4
    assert joint_log_likelihood(ys, code, P, 2, bounds=b) == pytest.approx(math.log(total), rel=1e-10)


@pytest.mark.parametrize("M", [2, 3])
def test_vectorised_joint_equals_reference(M):
    code = make_scheme("CC-1")
    P = ChannelParams.symmetric(0.08)
    rng = np.random.default_rng(M)
    w = rng.integers(0, code.A, size=3)
    reads = transmit_multi(code.encode(w), P, M, rng)
    b = DriftBounds(-2, 2, 1, code.n)
    if not all(b.contains(d) for d in reads.final_drifts()):
        pytest.skip("sampled read left the small window")
    fast = decode_joint(reads, code, P, 3, bounds=b)
    ref = decode_joint_reference(reads, code, P, 3, bounds=b)
    np.testing.assert_allclose(fast.app, ref.app, atol=1e-13)
    assert fast.log_py == pytest.approx(ref.log_py, rel=1e-12)
    assert fast.edges == ref.edges


def test_joint_single_read_reduces_to_single():
    code = make_scheme("TVC-2")
    P = ChannelParams.symmetric(0.05)
    rng = np.random.default_rng(3)
    w = rng.integers(0, 16, size=40)
    reads = transmit_multi(code.encode(w), P, 1, rng)
    a = decode_joint(reads, code, P, 40)
    s = decode_single(reads.reads[0], code, P, 40)
    np.testing.assert_allclose(a.app, s.app, atol=1e-12)
    assert a.log_py == pytest.approx(s.log_py, rel=1e-12)


def test_capacity_error():
    b = DriftBounds(-20, 20, 2, 4)
    with pytest.raises(CapacityError):
        check_budget(b, 3)
    check_budget(b, 2)
    code = make_scheme("WM")
    P = ChannelParams.symmetric(0.1)
    reads = transmit_multi(code.encode(np.zeros(200, dtype=int)), P, 3, np.random.default_rng(0))
    with pytest.raises(CapacityError):
        decode_joint(reads, code, P, 200)


def test_combine_separate_rule():
    a1 = np.array([[0.6, 0.4], [0.5, 0.5]])
    a2 = np.array([[0.8, 0.2], [0.1, 0.9]])
    out, collapsed = combine_separate([a1, a2])
    np.testing.assert_allclose(out[0], [0.48, 0.08] / np.float64(0.56))
    np.testing.assert_allclose(out[1], [0.1, 0.9])
    assert not collapsed.any()
    # with a nonuniform prior the product is divided by prior^(M-1)
    prior = np.array([[0.25, 0.75], [0.5, 0.5]])
    out, _ = combine_separate([a1, a2], prior)
    r = np.array([0.6 * 0.8 / 0.25, 0.4 * 0.2 / 0.75])
    np.testing.assert_allclose(out[0], r / r.sum())


def test_combine_separate_flags_contradictions():
    out, collapsed = combine_separate([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])])
    assert collapsed[0]
    np.testing.assert_allclose(out[0], [0.5, 0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(2, 16), st.integers(1, 4), st.integers(0, 2**31))
def test_combine_is_symmetric_and_normalised(rows, A, M, seed):
    rng = np.random.default_rng(seed)
    apps = [rng.dirichlet(np.ones(A), size=rows) for _ in range(M)]
    out, _ = combine_separate(apps)
    np.testing.assert_allclose(out.sum(axis=1), 1.0)
    rev, _ = combine_separate(apps[::-1])
    np.testing.assert_allclose(out, rev, atol=1e-12)
    if M == 1:
        np.testing.assert_allclose(out, apps[0], atol=1e-12)


def test_separate_skips_erased_reads():
    code = make_scheme("WM")
    P = ChannelParams.symmetric(0.02)
    rng = np.random.default_rng(8)
    w = rng.integers(0, 16, size=30)
    good = transmit_multi(code.encode(w), P, 2, rng).reads
    bad = np.zeros(code.channel_length(30) * 3, dtype=np.int64)  # far outside any window
    res = decode_separate(ReadSet(good + [bad], 120), code, P, 30)
    assert res.extra["reads_used"] == 2 and res.extra["reads_erased"] == 1
    ref = decode_separate(ReadSet(good, 120), code, P, 30)
    np.testing.assert_allclose(res.app, ref.app)
    all_bad = decode_separate(ReadSet([bad], 120), code, P, 30)
    assert all_bad.erased


def test_more_reads_help():
    code = make_scheme("TVC-2")
    P = ChannelParams.symmetric(0.1)
    rng = np.random.default_rng(12)
    ok1 = ok3 = 0
    for _ in range(5):
        w = rng.integers(0, 16, size=60)
        reads = transmit_multi(code.encode(w), P, 3, rng)
        ok1 += (decode_single(reads.reads[0], code, P, 60).app.argmax(1) == w).sum()
        ok3 += (decode_separate(reads, code, P, 60).app.argmax(1) == w).sum()
    assert ok3 > ok1


def test_complexity_formulas():
    r = complexity_of(N=960, n=4, nu=0, k=4, Delta=100, delta=13, M=2)
    assert r.edges_single == 240 * 16 * 1300
    assert r.edges_separate == 2 * r.edges_single
    assert r.edges_joint == 240 * 16 * 1300**2
    code = make_scheme("CC-2")
    b = DriftBounds(-5, 5, 2, 4)
    rep = complexity_for(code, 100, b, M=1)
    assert rep.params["nu"] == 2 and rep.edges_single == (code.channel_length(100) // 4) * 2 ** (2 + 4) * 11 * 13
