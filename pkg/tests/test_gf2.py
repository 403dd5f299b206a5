import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeppolar.gf2 import (
    CRC11,
    CrcPoly,
    InvalidLengthError,
    crc_attach,
    crc_compute,
    crc_verify,
    polar_transform,
    polar_transform_transposed,
)


def kron_matrix(N):
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.ones((1, 1), dtype=np.int64)
    while G.shape[0] < N:
        G = np.kron(G, F)
    return G


def crc_by_polynomial_division(bits, coeffs):
    # integers as GF(2) polynomials, MSB = highest power
    r = len(coeffs) - 1
    g = int("".join(map(str, coeffs)), 2)
    v = int("".join(map(str, bits)), 2) << r
    for shift in range(v.bit_length() - 1, r - 1, -1):
        if v >> shift & 1:
            v ^= g << (shift - r)
    return [v >> (r - 1 - i) & 1 for i in range(r)]


bit_blocks = st.integers(1, 10).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n))


def test_transform_examples():
    assert polar_transform([0, 0, 0, 0]).tolist() == [0, 0, 0, 0]
    assert polar_transform([0, 1]).tolist() == [1, 1]
    assert polar_transform([1, 0]).tolist() == [1, 0]
    assert polar_transform([1, 1, 0, 0]).tolist() == [0, 1, 0, 0]


def test_transposed_examples():
    assert polar_transform_transposed([0, 1]).tolist() == [0, 1]
    assert polar_transform_transposed([0, 1, 0, 0]).tolist() == [0, 1, 0, 1]


@pytest.mark.parametrize("N", [2, 4, 8, 16, 32])
def test_transform_matches_matrix(N):
    rng = np.random.default_rng(N)
    u = rng.integers(0, 2, (50, N))
    G = kron_matrix(N)
    assert np.array_equal(polar_transform(u), (u @ G) % 2)
    assert np.array_equal(polar_transform_transposed(u), (u @ G.T) % 2)


@settings(max_examples=200, deadline=None)
@given(bit_blocks)
def test_involutions_and_reversal(bits):
    u = np.array(bits, dtype=np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)
    assert np.array_equal(polar_transform_transposed(polar_transform_transposed(u)), u)
    assert np.array_equal(polar_transform_transposed(u), polar_transform(u[::-1])[::-1])


def test_linearity_batch():
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2, (200, 64))
    v = rng.integers(0, 2, (200, 64))
    for T in (polar_transform, polar_transform_transposed):
        assert np.array_equal(T(u ^ v), T(u) ^ T(v))


@pytest.mark.parametrize("bad", [0, 3, 6, 12])
def test_invalid_length(bad):
    with pytest.raises(InvalidLengthError):
        polar_transform(np.zeros(bad, dtype=np.uint8))


def test_rejects_non_binary():
    with pytest.raises(ValueError):
        polar_transform([0, 2])


def test_crc_examples():
    assert crc_compute(np.zeros(17, dtype=np.uint8)).tolist() == [0] * 11
    assert crc_compute([1]).tolist() == [1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1]
    assert CRC11.degree == 11


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_crc_matches_division_oracle(bits):
    assert crc_compute(bits).tolist() == crc_by_polynomial_division(bits, CRC11.coefficients)


def test_crc_detects_single_bit_errors():
    rng = np.random.default_rng(1)
    m = rng.integers(0, 2, 40)
    block = crc_attach(m)
    assert crc_verify(block)
    for i in range(block.size):
        bad = block.copy()
        bad[i] ^= 1
        assert not crc_verify(bad)


def test_crc_batch_matches_single():
    rng = np.random.default_rng(2)
    m = rng.integers(0, 2, (30, 25))
    batch = crc_compute(m)
    for row, c in zip(m, batch):
        assert np.array_equal(crc_compute(row), c)
    assert crc_verify(crc_attach(m)).all()


def test_custom_polynomial():
    poly = CrcPoly((1, 0, 1, 1), name="crc3")
    bits = [1, 0, 1, 1, 0, 1]
    assert crc_compute(bits, poly).tolist() == crc_by_polynomial_division(bits, poly.coefficients)
    with pytest.raises(ValueError):
        CrcPoly((0, 1))
