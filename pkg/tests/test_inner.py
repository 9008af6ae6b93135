import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idscode import inner
from idscode.inner import (
    BlockCode,
    CliqueDesignFailure,
    Codebook,
    ConvCode,
    OffsetSequence,
    Schedule,
    clique_design,
    dm_construct,
    identity_code,
    lcs_length,
    levenshtein_indel,
    make_scheme,
    pairwise_indel,
    read_codebooks,
    tvc_codebooks,
    verify_codebook,
    write_codebooks,
)


def _indel_by_recursion(a, b):
    # textbook recursion, independent of the LCS table
    a, b = tuple(a), tuple(b)

    memo = {}

    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        if (i, j) not in memo:
            memo[i, j] = d(i + 1, j + 1) if a[i] == b[j] else 1 + min(d(i + 1, j), d(i, j + 1))
        return memo[i, j]

    return d(0, 0)


def test_known_distances():
    assert levenshtein_indel([0, 1, 2, 3], [1, 2, 3, 0]) == 2
    assert levenshtein_indel([0, 0], [1, 1]) == 4
    assert lcs_length([], [1, 2]) == 0


@given(st.lists(st.integers(0, 3), max_size=8), st.lists(st.integers(0, 3), max_size=8))
def test_indel_distance_matches_recursion(a, b):
    assert levenshtein_indel(a, b) == _indel_by_recursion(a, b)
    assert levenshtein_indel(a, b) == levenshtein_indel(b, a)


def test_pairwise_matrix():
    words = np.array(list(itertools.product(range(3), repeat=3)))
    D = pairwise_indel(words)
    for i, j in [(0, 5), (7, 20), (13, 13), (26, 1)]:
        assert D[i, j] == levenshtein_indel(words[i], words[j])
    np.testing.assert_array_equal(D, D.T)


def test_dm_construct_lowest_weight():
    cb = dm_construct(4, 4, 4)
    assert cb.size == 16 and cb.n == 4 and cb.k == 4
    w = (cb.words != 0).sum(axis=1)
    # 1 word of weight 0, all 12 of weight 1, then the first 3 of weight 2
    assert list(np.bincount(w)) == [1, 12, 3]
    assert cb.as_tuples()[-3:] == [(0, 0, 1, 1), (0, 0, 1, 2), (0, 0, 1, 3)]
    assert cb.as_tuples()[0] == (0, 0, 0, 0)


def test_clique_design_meets_distance():
    cbs = clique_design(4, 4, 4, 16, t=4)
    assert len(cbs) == 4
    for cb in cbs:
        assert cb.size == 16
        assert verify_codebook(cb, 4)[0]


def test_clique_design_failure_reports_largest():
    with pytest.raises(CliqueDesignFailure) as e:
        clique_design(3, 4, 4, 16)
    largest = e.value.largest
    assert largest is not None and 1 < largest.size < 16
    assert verify_codebook(largest, 4)[0]


def test_verify_codebook_reports_closest_pair():
    cb = Codebook([[0, 0, 0, 0], [0, 0, 0, 1], [3, 3, 3, 3], [2, 2, 2, 2]], 4)
    ok, (i, j, dist) = verify_codebook(cb, 4)
    assert not ok and (i, j, dist) == (0, 1, 2)


def test_codebook_file_round_trip(tmp_path):
    cbs = tvc_codebooks()
    p = tmp_path / "cb.txt"
    write_codebooks(p, cbs, 4)
    back, d = read_codebooks(p)
    assert d == 4
    for a, b in zip(cbs, back):
        np.testing.assert_array_equal(a.words, b.words)


def test_tvc_file_shape():
    cbs = tvc_codebooks()
    assert len(cbs) == 4 and all(cb.size == 16 and cb.n == 4 and cb.q == 4 for cb in cbs)
    # the first three codebooks satisfy the distance; see the acceptance test for the fourth
    assert all(verify_codebook(cb, 4)[0] for cb in cbs[:3])


def test_schedules():
    assert list(Schedule("round_robin", 4).indices(6)) == [0, 1, 2, 3, 0, 1]
    s = Schedule("random_no_repeat", 4, seed=9)
    idx = s.indices(500)
    assert (idx[1:] != idx[:-1]).all()
    assert set(idx) == {0, 1, 2, 3}
    np.testing.assert_array_equal(idx, Schedule("random_no_repeat", 4, seed=9).indices(500))
    np.testing.assert_array_equal(s.indices(10), idx[:10])
    with pytest.raises(ValueError):
        Schedule("random_no_repeat", 1)


def test_offset_sequence_is_reproducible():
    a = OffsetSequence(3).symbols(100)
    np.testing.assert_array_equal(a, OffsetSequence(3).symbols(100))
    np.testing.assert_array_equal(a[:10], OffsetSequence(3).symbols(10))
    assert set(a) <= {0, 1, 2, 3}


def _conv57(bits):
    # direct shift-register encoding of g = [5, 7]_8, output pairs packed as quaternary symbols
    s1 = s2 = 0
    out = []
    for b in bits:
        o1 = b ^ s2
        o2 = b ^ s1 ^ s2
        out.append(o1 << 1 | o2)
        s1, s2 = b, s1
    return out


@pytest.mark.parametrize("group", [1, 2, 4])
def test_conv_code_matches_shift_register(group):
    code = ConvCode(group)
    rng = np.random.default_rng(group)
    w = rng.integers(0, code.A, size=12)
    bits = [int(a) >> (group - 1 - j) & 1 for a in w for j in range(group)]
    bits += [0] * (group * code.m)
    np.testing.assert_array_equal(code.encode(w), _conv57(bits))
    assert code.channel_length(12) == group * (12 + code.m)


def test_conv_generators():
    assert ConvCode(1).generator_octal() == [0o5, 0o7]
    assert ConvCode(2).generator_octal() == [0o5, 0o7, 0o12, 0o16]


def test_conv_termination_returns_to_zero_state():
    code = ConvCode(2)
    w = np.array([3, 1, 2, 3])
    s = 0
    full = np.concatenate([w, np.zeros(code.m, dtype=int)])
    for a in full:
        s = code.next_state[s, a]
    assert s == 0
    mask = code.input_mask(4)
    assert mask[:4].all() and not mask[4:, 1:].any()


def test_offset_added_and_stripped():
    code = make_scheme("TVC-2")
    w = np.arange(16)
    x = code.encode(w)
    plain = BlockCode(tvc_codebooks(), Schedule("round_robin", 4)).encode(w)
    np.testing.assert_array_equal(code.strip_offset(x), plain)


def test_block_code_uses_schedule():
    cbs = tvc_codebooks()
    code = BlockCode(cbs, Schedule("round_robin", 4))
    x = code.encode(np.array([5, 5, 5, 5, 5])).reshape(5, 4)
    for i in range(5):
        np.testing.assert_array_equal(x[i], cbs[i % 4].words[5])


@pytest.mark.parametrize("name", inner.SCHEMES)
def test_schemes_have_unit_rate(name):
    code = make_scheme(name)
    expected = 2.0 if name == "identity" else 1.0
    assert code.k / code.n == expected
    assert code.rate_bits(1000) == pytest.approx(expected, rel=0.01)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        make_scheme("nope")


def test_identity_code():
    code = identity_code(4)
    np.testing.assert_array_equal(code.encode([3, 1, 0]), [3, 1, 0])
    with pytest.raises(ValueError):
        identity_code(3)
    with pytest.raises(ValueError):
        code.encode([4])


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["CC-1", "CC-2", "WM", "TVC-1", "TVC-2"]), st.integers(1, 40), st.integers(0, 2**31))
def test_encoding_is_injective_per_section(name, N_o, seed):
    code = make_scheme(name)
    rng = np.random.default_rng(seed)
    w = rng.integers(0, code.A, size=N_o)
    x = code.encode(w)
    assert x.size == code.channel_length(N_o)
    assert ((0 <= x) & (x < code.q)).all()
    out = code.section_outputs(N_o)
    # distinct inputs from the same state emit distinct words in every section
    for t in range(min(N_o, 5)):
        for s in range(code.n_states):
            assert len({tuple(v) for v in out[t, s]}) == code.A
