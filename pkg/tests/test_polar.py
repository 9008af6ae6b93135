import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idscode.gf import gf
from idscode.polar import (
    DATA_DIR,
    PolarSpec,
    build_u,
    crc8,
    crc_ok,
    crc_symbols,
    decode_sc,
    decode_scl,
    encode_polar,
    genie_sc,
    kernel_failure,
    optimize_kernel,
    polar_encode_info,
    polar_inverse,
    read_frozen,
    select_frozen,
    symbols_to_bits,
    symmetric_app_source,
    write_frozen,
)


def _generator(N, alpha, beta, q):
    """Kronecker power of [[1, 0], [alpha, beta]] over GF(q), built block by block."""
    mul = gf(q.bit_length() - 1).mul_table
    K = np.array([[1, 0], [alpha, beta]])
    G = np.array([[1]])
    while G.shape[0] < N:
        G = np.block([[mul[K[i, j], G] for j in range(2)] for i in range(2)])
    return G


def _times(u, G, q):
    mul = gf(q.bit_length() - 1).mul_table
    x = np.zeros(G.shape[1], dtype=np.int64)
    for i, ui in enumerate(u):
        x ^= mul[ui, G[i]]
    return x


def test_binary_transform_is_arikan():
    F = np.array([[1, 0], [1, 1]])
    G = np.kron(np.kron(F, F), F) % 2
    for u in itertools.product(range(2), repeat=8):
        np.testing.assert_array_equal(encode_polar(u, 1, 1, 2), np.array(u) @ G % 2)


@pytest.mark.parametrize("alpha,beta", [(0, 1), (1, 1), (2, 3), (3, 2)])
def test_transform_matches_generator_matrix(alpha, beta):
    G = _generator(8, alpha, beta, 4)
    rng = np.random.default_rng(alpha * 4 + beta)
    for _ in range(20):
        u = rng.integers(0, 4, size=8)
        np.testing.assert_array_equal(encode_polar(u, alpha, beta, 4), _times(u, G, 4))


def test_transform_is_a_bijection():
    words = {tuple(encode_polar(u, 2, 1, 4)) for u in itertools.product(range(4), repeat=4)}
    assert len(words) == 256
    with pytest.raises(ValueError):
        encode_polar([0, 1, 2], 1, 1, 4)
    with pytest.raises(ValueError):
        encode_polar([0, 1], 1, 0, 4)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 4, 16]), st.integers(0, 6), st.integers(0, 2**31))
def test_inverse_round_trip(q, log_n, seed):
    rng = np.random.default_rng(seed)
    alpha, beta = int(rng.integers(0, q)), int(rng.integers(1, q))
    u = rng.integers(0, q, size=1 << log_n)
    np.testing.assert_array_equal(polar_inverse(encode_polar(u, alpha, beta, q), alpha, beta, q), u)


def test_crc8_check_value():
    # standard check string for the zero-init, unreflected 0x07 CRC-8
    data = np.frombuffer(b"123456789", dtype=np.uint8).astype(np.int64)
    assert crc8(symbols_to_bits(data, 8)) == 0xF4
    assert crc8([]) == 0


def test_crc_symbol_packing():
    info = np.array([1, 2, 3, 0, 1])
    c4 = crc_symbols(info, 4)
    assert c4.size == 4
    bits = symbols_to_bits(info, 2)
    assert int("".join(str(b) for b in symbols_to_bits(c4, 2)), 2) == crc8(bits)
    assert crc_symbols(np.array([5, 9]), 16).size == 2
    assert crc_symbols(info, 4, 0).size == 0
    with pytest.raises(ValueError):
        crc_symbols(info, 4, 16)


def test_spec_validation():
    s = PolarSpec(16, 4, 4, 2)
    assert s.crc_syms == 4 and s.n_frozen == 8
    assert PolarSpec(16, 4, 16, 2).crc_syms == 2
    with pytest.raises(ValueError):
        PolarSpec(12, 4, 4, 2)
    with pytest.raises(ValueError):
        PolarSpec(16, 4, 4, 2, beta=0)
    with pytest.raises(ValueError):
        PolarSpec(16, 4, 4, 2, frozen=(0, 1))


def test_build_u_places_info_then_crc():
    spec = PolarSpec(16, 4, 4, 2, frozen=tuple(range(8)))
    info = np.array([3, 1, 0, 2])
    u = build_u(info, spec)
    assert not u[:8].any()
    np.testing.assert_array_equal(u[8:12], info)
    np.testing.assert_array_equal(u[12:], crc_symbols(info, 4))
    assert crc_ok(u, spec)
    u[9] ^= 1
    assert not crc_ok(u, spec)


def test_frozen_file_round_trip(tmp_path):
    spec = PolarSpec(16, 4, 4, 3, 2, frozen=(0, 1, 2, 4, 8, 3, 5, 6))
    write_frozen(tmp_path / "f.txt", spec)
    back = read_frozen(tmp_path / "f.txt")
    assert back == spec


def test_bundled_frozen_set():
    spec = read_frozen(DATA_DIR / "polar_cc1_64_32_q4.txt")
    assert (spec.N_o, spec.K, spec.q, spec.alpha, spec.beta, spec.crc_bits) == (64, 32, 4, 3, 1, 8)
    assert len(spec.frozen) == 28 and 0 in spec.frozen and 63 not in spec.frozen


def test_noiseless_decoding():
    spec = PolarSpec(64, 32, 4, 3, frozen=tuple(range(28)))
    rng = np.random.default_rng(0)
    info = rng.integers(0, 4, size=32)
    x = polar_encode_info(info, spec)
    for res in (decode_scl(np.eye(4)[x], spec), decode_sc(np.eye(4)[x], spec)):
        assert res.crc_ok
        np.testing.assert_array_equal(res.info, info)
        np.testing.assert_array_equal(res.word, x)


def _ml_decode(apps, frozen, alpha, beta, q):
    N = apps.shape[0]
    free = [i for i in range(N) if i not in frozen]
    best, best_p = None, -1.0
    for vals in itertools.product(range(q), repeat=len(free)):
        u = np.zeros(N, dtype=np.int64)
        u[free] = vals
        x = encode_polar(u, alpha, beta, q)
        p = np.prod(apps[np.arange(N), x])
        if p > best_p:
            best, best_p = u, p
    return best, best_p


def test_full_list_is_maximum_likelihood():
    rng = np.random.default_rng(1)
    for _ in range(10):
        spec = PolarSpec(4, 2, 4, 2, frozen=(0, 1), crc_bits=0)
        apps = rng.dirichlet(np.ones(4), size=4)
        u_ml, p_ml = _ml_decode(apps, spec.frozen, 2, 1, 4)
        res = decode_scl(apps, spec, list_size=16)
        np.testing.assert_array_equal(res.u, u_ml)
        # path metric is -log p(u | y) under a uniform prior on all q^N inputs
        norm = np.prod(apps.sum(axis=1))
        assert res.metric == pytest.approx(-np.log(p_ml / norm), rel=1e-9)


def test_genie_leaves_match_enumeration():
    q, N, alpha, beta = 4, 4, 3, 2
    rng = np.random.default_rng(2)
    apps = rng.dirichlet(np.ones(q), size=N)
    u_true = rng.integers(0, q, size=N)
    errors, leaves = genie_sc(apps, u_true, alpha, beta, q)
    for i in range(N):
        marg = np.zeros(q)
        for rest in itertools.product(range(q), repeat=N - i - 1):
            for a in range(q):
                u = np.concatenate([u_true[:i], [a], rest]).astype(np.int64)
                x = encode_polar(u, alpha, beta, q)
                marg[a] += np.prod(apps[np.arange(N), x])
        np.testing.assert_allclose(leaves[i], marg / marg.sum(), atol=1e-12)
        assert errors[i] == (marg.argmax() != u_true[i])


def test_list_size_one_is_sc():
    spec = PolarSpec(32, 8, 4, 3, frozen=tuple(range(20)))
    src = symmetric_app_source(0.2, 4)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = polar_encode_info(rng.integers(0, 4, size=8), spec)
        apps = src(x, rng)
        a, b = decode_sc(apps, spec), decode_scl(apps, spec, list_size=1)
        np.testing.assert_array_equal(a.u, b.u)
        assert a.metric == b.metric


def test_list_decoding_does_not_hurt():
    spec = PolarSpec(32, 8, 4, 3, frozen=tuple(range(20)))
    src = symmetric_app_source(0.25, 4)
    rng = np.random.default_rng(4)
    sc_err = scl_err = 0
    for _ in range(60):
        info = rng.integers(0, 4, size=8)
        apps = src(polar_encode_info(info, spec), rng)
        sc_err += not np.array_equal(decode_sc(apps, spec).info, info)
        scl_err += not np.array_equal(decode_scl(apps, spec, 8).info, info)
    assert scl_err <= sc_err and sc_err > 0


def test_select_frozen_tie_break_and_ordering():
    spec = PolarSpec(16, 4, 4, 3)
    clean, freq = select_frozen(spec, symmetric_app_source(0.0, 4), 5, np.random.default_rng(0))
    assert not freq.any() and clean.frozen == tuple(range(8))
    noisy, freq = select_frozen(spec, symmetric_app_source(0.2, 4), 300, np.random.default_rng(1))
    # the first synthetic channel is the worst and the last the best
    assert 0 in noisy.frozen and 15 not in noisy.frozen
    assert freq[0] == freq.max() and freq[15] == freq.min()
    erased, freq = select_frozen(spec, lambda w, rng: None, 3, np.random.default_rng(0))
    assert not freq.any()


def test_select_frozen_matches_exhaustive_genie():
    # exact genie error probabilities on GF(4), N_o = 4, by enumerating every channel output.
    # The symmetric channel is invariant under XOR shifts, so leaves for input u are the
    # u = 0 leaves relabelled by u_i; only the argmax tie-break (lowest symbol) needs care.
    q, N, alpha, beta, eps = 4, 4, 2, 1, 0.3
    ch = np.full((q, q), eps / (q - 1))
    np.fill_diagonal(ch, 1 - eps)
    exact = np.zeros(N)
    for y in itertools.product(range(q), repeat=N):
        _, leaves = genie_sc(ch[list(y)], np.zeros(N, dtype=np.int64), alpha, beta, q)
        for i in range(N):
            top = set(np.flatnonzero(leaves[i] >= leaves[i].max() * (1 - 1e-12)))
            miss = np.mean([min(a for a in range(q) if a ^ ui in top) != ui for ui in range(q)])
            exact[i] += np.prod(ch[0, list(y)]) * miss
    spec = PolarSpec(N, 1, q, alpha, crc_bits=0)
    chosen, freq = select_frozen(spec, symmetric_app_source(eps, q), 4000, np.random.default_rng(5))
    np.testing.assert_allclose(freq, exact, atol=0.03)
    assert chosen.frozen == tuple(sorted(sorted(range(N), key=lambda i: (-exact[i], i))[:3]))


def test_kernel_failure():
    q = 4
    truth = np.tile(np.arange(q), 50)
    perfect = np.eye(q)[truth]
    m, se = kernel_failure(perfect, truth, 2, 1, 500, np.random.default_rng(0))
    assert m == 0.0 and se == 0.0
    with pytest.raises(ValueError):
        kernel_failure(perfect[:3], truth[:3], 2, 1, 10, np.random.default_rng(0))
    src = symmetric_app_source(0.3, q)
    rng = np.random.default_rng(1)
    apps = src(truth, rng)
    scores = optimize_kernel(apps, truth, 2000, rng)
    assert [s.ratio for s in scores] != [] and sorted(s.ratio for s in scores) == [1, 2, 3]
    assert all(a.failure <= b.failure for a, b in zip(scores, scores[1:]))
    assert all(0 < s.failure < 1 for s in scores)
