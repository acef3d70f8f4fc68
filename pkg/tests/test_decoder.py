import itertools

import numpy as np
import pytest

from pnc_ldpc.decoder import BPDecoder, decode, phi
from pnc_ldpc.ldpc_code import encode, syndrome_check


def exact_map(H, llr):
    """Bitwise MAP LLRs by enumerating every codeword of a tiny code."""
    dense = H.to_dense()
    words = np.array([w for w in itertools.product((0, 1), repeat=H.n) if not (dense @ w % 2).any()])
    # log weight of each word under independent bit LLRs (ln P1 - ln P0)
    logw = (words * llr).sum(axis=1)
    out = np.empty(H.n)
    for j in range(H.n):
        one = words[:, j] == 1
        out[j] = np.logaddexp.reduce(logw[one]) - np.logaddexp.reduce(logw[~one])
    return out


def test_phi_self_inverse():
    x = np.linspace(0.05, 20, 200)
    assert np.allclose(phi(phi(x)), x, rtol=1e-8)


def test_tree_matches_exact_map(tree_H):
    rng = np.random.default_rng(0)
    for _ in range(20):
        llr = rng.normal(0, 2, tree_H.n)
        res = decode(llr, tree_H, iterations=10, early_exit=False)
        assert np.abs(res.posterior - exact_map(tree_H, llr)).max() < 1e-6


def test_tree_extrinsic_independent_of_own_input(tree_H):
    rng = np.random.default_rng(1)
    llr = rng.normal(0, 2, tree_H.n)
    base = decode(llr, tree_H, iterations=10, early_exit=False).extrinsic
    for j in range(tree_H.n):
        moved = llr.copy()
        moved[j] += 7.0
        ext = decode(moved, tree_H, iterations=10, early_exit=False).extrinsic
        assert ext[j] == pytest.approx(base[j], abs=1e-9)


def test_extrinsic_is_posterior_minus_input(small_H):
    llr = np.random.default_rng(2).normal(0, 3, small_H.n)
    res = decode(llr, small_H, iterations=5, early_exit=False)
    assert np.allclose(res.extrinsic, res.posterior - llr)


def test_saturated_all_ones_codeword(wimax_H):
    # every WiMAX row has even weight, so the all-one word is a codeword
    assert syndrome_check(np.ones(wimax_H.n, dtype=int), wimax_H)
    res = decode(np.full(wimax_H.n, 50.0), wimax_H, iterations=1)
    assert res.hard.all()
    assert res.iterations[0] == 1 and res.converged[0]


def test_zero_input_fixed_point(small_H):
    res = decode(np.zeros(small_H.n), small_H, iterations=20)
    assert not res.posterior.any()
    assert not res.converged[0]
    assert res.iterations[0] == 20


def test_high_snr_all_zero_codeword(wimax_H):
    # BPSK over AWGN at 20 dB Eb/N0, rate 2/3: LLR = -2 * 2 r / sigma^2 with x = +1 for bit 0
    rng = np.random.default_rng(3)
    sigma2 = 1 / (2 * (2 / 3) * 10 ** 2.0)
    y = 1 + np.sqrt(sigma2) * rng.standard_normal((100, wimax_H.n))
    res = BPDecoder(wimax_H).decode(-2 * y / sigma2)
    assert not res.hard.any()
    assert res.converged.all()


def test_odd_weight_checks(small_H):
    # the boundary row has odd weight; a clean codeword must decode to itself
    assert small_H.row_weights[0] % 2 == 1
    rng = np.random.default_rng(7)
    c = encode(rng.integers(0, 2, small_H.k), small_H).astype(np.int64)
    res = decode(np.where(c == 1, 3.0, -3.0), small_H, iterations=5)
    assert np.array_equal(res.hard, c)
    assert (res.posterior * (2 * c - 1) > 3.0).all()


def test_waterfall_sanity(wimax_H):
    rng = np.random.default_rng(4)
    u = rng.integers(0, 2, (20, wimax_H.k))
    c = encode(u, wimax_H).astype(np.int64)
    sigma = 0.6
    y = (1 - 2 * c) + sigma * rng.standard_normal(c.shape)
    res = BPDecoder(wimax_H).decode(-2 * y / sigma**2)
    assert np.array_equal(res.hard, c)


def test_batch_equals_single(small_H):
    rng = np.random.default_rng(5)
    llr = rng.normal(0.5, 2, (6, small_H.n))
    dec = BPDecoder(small_H)
    batch = dec.decode(llr, iterations=30)
    for f in range(6):
        one = dec.decode(llr[f], iterations=30)
        assert np.array_equal(one.posterior, batch.posterior[f])
        assert one.iterations[0] == batch.iterations[f]


def test_deterministic(small_H):
    llr = np.random.default_rng(6).normal(0, 2, small_H.n)
    a = decode(llr, small_H, iterations=25)
    b = decode(llr, small_H, iterations=25)
    assert np.array_equal(a.posterior, b.posterior)


def test_dimension_checks(small_H):
    with pytest.raises(ValueError):
        decode(np.zeros(small_H.n + 1), small_H)
    with pytest.raises(ValueError):
        decode(np.zeros(small_H.n), small_H, iterations=0)
