import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnc_ldpc.jfunc import I_MAX, J, J_inv, j_exact, j_inv_exact, mutual_information, sigma_max


def test_j_zero_and_limit():
    assert J(0.0) == 0.0
    assert j_exact(0.0) == 0.0
    assert J(40.0) == 1.0
    assert j_exact(30.0) > 1 - 1e-12


def test_j_rejects_negative():
    with pytest.raises(ValueError):
        J(-0.1)
    with pytest.raises(ValueError):
        j_exact(-1.0)


def test_j_monte_carlo_oracle():
    # L ~ N(sigma^2/2, sigma^2) with sigma = 2 -> N(2, 4); 1e7 samples in chunks
    rng = np.random.default_rng(2001)
    total, n, sq = 0.0, 0, 0.0
    for _ in range(10):
        ell = rng.normal(2.0, 2.0, 1_000_000)
        loss = np.logaddexp(0.0, -ell) / np.log(2)
        total += loss.sum()
        sq += (loss**2).sum()
        n += loss.size
    mean = total / n
    se = np.sqrt((sq / n - mean**2) / n)
    assert abs((1 - mean) - j_exact(2.0)) < 3 * se


def test_spline_matches_quadrature():
    sig = np.concatenate([np.linspace(0.01, 15.9, 157), [0.123, 1.777, 7.31, 11.11]])
    ref = np.array([j_exact(s) for s in sig])
    assert np.abs(J(sig) - ref).max() < 1e-8


def test_j_strictly_increasing():
    s = np.linspace(0, 12, 5000)
    assert (np.diff(J(s)) > 0).all()


def test_round_trip_on_sigma_grid():
    s = np.linspace(0, 10, 2001)
    assert np.abs(J_inv(J(s)) - s).max() < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.999999))
def test_round_trip_on_information(i):
    assert J(J_inv(i)) == pytest.approx(i, abs=1e-6)


def test_j_inv_matches_root_finding():
    for i in (0.05, 0.3, 0.5, 0.9, 0.999):
        assert J_inv(i) == pytest.approx(j_inv_exact(i), abs=1e-8)


def test_j_inv_clamps_at_one():
    assert J_inv(1.0) == pytest.approx(sigma_max(), abs=1e-6)
    assert J(sigma_max()) == pytest.approx(I_MAX, abs=1e-9)
    assert J_inv(0.0) == 0.0


def test_mi_zero_llrs():
    assert mutual_information(np.zeros(100), np.arange(100) % 2) == pytest.approx(0.0, abs=1e-15)


def test_mi_saturated():
    b = np.arange(1000) % 2
    z = np.where(b == 1, 50.0, -50.0)
    assert mutual_information(z, b) == pytest.approx(1.0, abs=1e-15)


def test_mi_errors():
    with pytest.raises(ValueError):
        mutual_information([], [])
    with pytest.raises(ValueError):
        mutual_information([1.0, 2.0], [1])


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5, 2.0, 4.0])
def test_mi_matches_j_on_consistent_gaussian(sigma):
    rng = np.random.default_rng(int(sigma * 10))
    b = rng.integers(0, 2, 1_000_000)
    # consistent Gaussian in the ln P(1) - ln P(0) convention
    z = (2 * b - 1) * sigma**2 / 2 + sigma * rng.standard_normal(b.size)
    assert mutual_information(z, b) == pytest.approx(J(sigma), abs=0.005)
