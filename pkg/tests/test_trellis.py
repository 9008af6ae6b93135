import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idscode.channel import ChannelParams, transmit
from idscode.inner import ConvCode, make_scheme
from idscode.trellis import (
    DriftBounds,
    app_pool,
    bounds_for,
    count_edges,
    decode_single,
    decode_single_extrinsic,
    extrinsic,
    lattice_forward,
    log_likelihood,
    prepare_priors,
)
from oracles import brute_force_app, enumerate_lattice


def test_lattice_single_symbol():
    P = ChannelParams(0.1, 0.2, 0.0, 4)
    # one deletion followed by nothing, or transmission
    assert lattice_forward([0], [], P) == pytest.approx(0.2)
    assert lattice_forward([0], [0], P) == pytest.approx(0.2 * 0.1 / 4 + 0.7)
    assert lattice_forward([0], [1], P) == pytest.approx(0.2 * 0.1 / 4)


def test_lattice_rejects_long_segment():
    with pytest.raises(ValueError):
        lattice_forward([0, 1], [0] * 7, ChannelParams.symmetric(0.1), I_max=2)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 1), min_size=1, max_size=3),
    st.lists(st.integers(0, 1), max_size=4),
    st.floats(0.01, 0.4),
    st.floats(0.01, 0.4),
    st.floats(0.0, 0.5),
)
def test_lattice_equals_unpruned_enumeration(x, y, pi, pd, ps):
    P = ChannelParams(pi, pd, ps, 2)
    assert lattice_forward(x, y, P) == pytest.approx(enumerate_lattice(x, y, pi, pd, ps, 2), rel=1e-12)


def test_dynamic_bounds():
    b = DriftBounds.dynamic(1000, ChannelParams.symmetric(0.05), 4)
    sigma = math.sqrt(1000 * 0.05 / 0.95)
    assert b.d_max == -b.d_min == math.ceil(5 * sigma)
    assert b.delta == 4 * 3 + 1
    wide = DriftBounds.dynamic(1000, ChannelParams.symmetric(0.05), 4, scale=10)
    assert wide.Delta > b.Delta
    # noiseless: window collapses to a single drift value
    assert DriftBounds.dynamic(100, ChannelParams(), 4).Delta == 1
    with pytest.raises(ValueError):
        DriftBounds(1, 3, 2, 4)


def test_bounds_escalate_then_erase():
    P = ChannelParams.symmetric(0.05)
    N, n = 1000, 4
    narrow = DriftBounds.dynamic(N, P, n)
    assert bounds_for([0], N, P, n) == narrow
    far = narrow.d_max + 3
    assert bounds_for([far], N, P, n).Delta > narrow.Delta
    assert bounds_for([10 * N], N, P, n) is None


def _conv_instances(count, seed):
    rng = np.random.default_rng(seed)
    code = ConvCode(1)
    for _ in range(count):
        pi, pd = rng.uniform(0.02, 0.3, size=2)
        yield code, ChannelParams(pi, pd, rng.uniform(0, 0.2), 4), rng


# I_max = 6 so no segment of a length-6 read is cut off
WIDE = DriftBounds(-4, 8, 6, 1)


def test_decode_single_with_memory_matches_brute_force():
    for code, P, rng in _conv_instances(40, 9):
        y = rng.integers(0, 4, size=int(rng.integers(0, 7)))
        ref, py = brute_force_app(code, [y], P, 2)
        res = decode_single(y, code, P, 2, bounds=WIDE)
        np.testing.assert_allclose(res.app[:2], ref, atol=1e-10)
        # termination sections carry the zero input with certainty
        np.testing.assert_allclose(res.app[2:, 0], 1.0)
        assert res.log_py == pytest.approx(math.log(py), rel=1e-10)
        assert res.log_py == pytest.approx(res.log_py_backward, rel=1e-10)
        assert log_likelihood(y, code, P, 2, bounds=WIDE) == pytest.approx(math.log(py), rel=1e-10)


def test_noiseless_decoding_is_certain():
    code = make_scheme("TVC-2")
    w = np.random.default_rng(0).integers(0, 16, size=50)
    res = decode_single(code.encode(w), code, ChannelParams(), 50)
    assert not res.erased
    np.testing.assert_array_equal(res.app.argmax(axis=1), w)
    assert res.app.max(axis=1).min() == pytest.approx(1.0)


def test_decoding_recovers_most_symbols():
    code = make_scheme("CC-2")
    P = ChannelParams.symmetric(0.03)
    rng = np.random.default_rng(4)
    w = rng.integers(0, code.A, size=100)
    res = decode_single(transmit(code.encode(w), P, rng), code, P, 100)
    assert (res.app[:100].argmax(axis=1) == w).mean() > 0.8
    assert np.allclose(res.app.sum(axis=1), 1.0)


def test_out_of_window_read_is_erased():
    code = make_scheme("WM")
    P = ChannelParams.symmetric(0.01)
    b = DriftBounds(-1, 1, 2, 4)
    y = np.zeros(code.channel_length(10) + 3, dtype=np.int64)
    res = decode_single(y, code, P, 10, bounds=b)
    assert res.erased
    np.testing.assert_allclose(res.app, 1 / 16)
    assert log_likelihood(y, code, P, 10, bounds=b) is None


def test_one_hot_prior_pins_the_app():
    code = make_scheme("TVC-1")
    P = ChannelParams.symmetric(0.05)
    rng = np.random.default_rng(2)
    w = rng.integers(0, 16, size=20)
    y = transmit(code.encode(w), P, rng)
    prior = np.eye(16)[w]
    res = decode_single(y, code, P, 20, priors=prior)
    np.testing.assert_allclose(res.app, prior, atol=1e-12)


def test_prior_validation():
    code = make_scheme("WM")
    with pytest.raises(ValueError):
        prepare_priors(code, 3, np.ones((3, 5)))
    with pytest.raises(ValueError):
        prepare_priors(code, 3, -np.ones((3, 16)))


def test_extrinsic():
    app = np.array([[0.5, 0.5], [0.9, 0.1]])
    np.testing.assert_allclose(extrinsic(app, np.full((2, 2), 0.5)), app)
    e = extrinsic(app, np.array([[0.25, 0.75], [0.5, 0.5]]))
    np.testing.assert_allclose(e[0], [0.75, 0.25])
    code = make_scheme("CC-1")
    P = ChannelParams.symmetric(0.05)
    rng = np.random.default_rng(3)
    w = rng.integers(0, code.A, size=30)
    y = transmit(code.encode(w), P, rng)
    prior = rng.dirichlet(np.ones(code.A), size=30)
    res = decode_single_extrinsic(y, code, P, 30, priors=prior)
    np.testing.assert_allclose(res.app.sum(axis=1), 1.0)
    assert "full_app" in res.extra


def test_edge_count():
    code = make_scheme("CC-1")
    b = DriftBounds(-2, 2, 2, code.n)
    T = code.n_sections(10)
    assert count_edges(code, 10, b) == (10 * 4 + code.m * 1) * 4 * 5 * b.delta
    assert T == 10 + code.m


def test_app_pool_shapes():
    code = make_scheme("TVC-2")
    apps, truth = app_pool(code, ChannelParams.symmetric(0.02), 16, 5, np.random.default_rng(0))
    assert apps.shape == (80, 16) and truth.shape == (80,)
    assert (apps.argmax(axis=1) == truth).mean() > 0.8


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["CC-1", "WM", "TVC-2"]), st.floats(0.0, 0.2), st.integers(1, 30), st.integers(0, 2**31))
def test_app_rows_are_distributions(name, p, N_o, seed):
    code = make_scheme(name)
    P = ChannelParams.symmetric(p)
    rng = np.random.default_rng(seed)
    w = rng.integers(0, code.A, size=N_o)
    res = decode_single(transmit(code.encode(w), P, rng), code, P, N_o)
    assert np.isfinite(res.app).all()
    np.testing.assert_allclose(res.app.sum(axis=1), 1.0, atol=1e-12)
    assert (res.app >= 0).all()
    if not res.erased:
        assert res.log_py == pytest.approx(res.log_py_backward, rel=1e-8, abs=1e-8)
