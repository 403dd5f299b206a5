"""Bit-vector arithmetic over GF(2).

Bit blocks are plain ``numpy.uint8`` arrays holding 0/1 values.  Index 0 is
the first (leftmost, first transmitted) bit everywhere; the polar transform
carries no hidden bit-reversal permutation.  All transforms act on the last
axis, so a 2-D array is treated as a batch of blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class InvalidLengthError(ValueError):
    """Block length is not a power of two."""


def as_bits(x, length: int | None = None) -> np.ndarray:
    """Validate ``x`` as a bit block and return it as a uint8 array."""
    arr = np.asarray(x)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit block entries must be 0 or 1")
    arr = arr.astype(np.uint8, copy=False)
    if length is not None and arr.shape[-1] != length:
        raise ValueError(f"expected {length} bits, got {arr.shape[-1]}")
    return arr


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_exact(n: int) -> int:
    if not is_power_of_two(n):
        raise InvalidLengthError(f"length {n} is not a power of two")
    return n.bit_length() - 1


def polar_transform(u) -> np.ndarray:
    """Return ``u @ F_N`` over GF(2) with ``F_N`` the n-fold Kronecker power
    of ``[[1, 0], [1, 1]]``, in O(N log N) butterfly form."""
    x = as_bits(u).copy()
    N = x.shape[-1]
    log2_exact(N)
    lead = x.shape[:-1]
    h = N // 2
    while h >= 1:
        v = x.reshape(*lead, N // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


def polar_transform_transposed(u) -> np.ndarray:
    """Return ``u @ F_N.T`` using ``F_N.T = J F_N J`` (J = index reversal)."""
    x = as_bits(u)
    return polar_transform(x[..., ::-1])[..., ::-1].copy()


@dataclass(frozen=True)
class CrcPoly:
    """Generator polynomial, coefficients listed from x^r down to x^0."""

    coefficients: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.coefficients) < 2 or self.coefficients[0] != 1:
            raise ValueError("CRC polynomial needs a leading 1 and degree >= 1")
        if any(c not in (0, 1) for c in self.coefficients):
            raise ValueError("CRC coefficients must be binary")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


CRC11 = CrcPoly((1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1), name="crc11")


def _crc_long_division(bits: np.ndarray, poly: CrcPoly) -> np.ndarray:
    r = poly.degree
    g = np.array(poly.coefficients, dtype=np.uint8)
    reg = np.concatenate([bits, np.zeros(r, dtype=np.uint8)])
    for i in range(len(bits)):
        if reg[i]:
            reg[i:i + r + 1] ^= g
    return reg[-r:].copy()


@lru_cache(maxsize=64)
def _crc_matrix(length: int, poly: CrcPoly) -> np.ndarray:
    # CRC is linear in the message: row i is the CRC of the i-th unit vector.
    eye = np.eye(length, dtype=np.uint8)
    rows = [_crc_long_division(e, poly) for e in eye]
    mat = np.array(rows, dtype=np.uint8).reshape(length, poly.degree)
    mat.setflags(write=False)
    return mat


def crc_compute(m, poly: CrcPoly = CRC11) -> np.ndarray:
    """Remainder of ``m(x) * x^r`` modulo ``g(x)``, MSB first.

    Zero initial register, no final XOR.  Accepts a batch on the last axis.
    """
    bits = as_bits(m)
    if bits.shape[-1] < 1:
        raise ValueError("CRC input must hold at least one bit")
    mat = _crc_matrix(bits.shape[-1], poly)
    return ((bits.astype(np.int64) @ mat) & 1).astype(np.uint8)


def crc_attach(m, poly: CrcPoly = CRC11) -> np.ndarray:
    bits = as_bits(m)
    return np.concatenate([bits, crc_compute(bits, poly)], axis=-1)


def crc_verify(block, poly: CrcPoly = CRC11):
    """True where the trailing ``r`` bits are the CRC of the leading bits."""
    bits = as_bits(block)
    r = poly.degree
    ok = (crc_compute(bits[..., :-r], poly) == bits[..., -r:]).all(axis=-1)
    return bool(ok) if ok.ndim == 0 else ok
