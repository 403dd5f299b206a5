"""Conventional rate matching: sub-block interleaving, puncturing, shortening
and repetition, plus the receiver-side LLR de-rate-matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decode import LLR_MAX
from .gf2 import as_bits, log2_exact
from .polar import CodeSpec, InvalidDimensionError, ReliabilitySequence, best_indices

SUBBLOCK_PATTERN = (0, 1, 2, 4, 3, 5, 6, 7, 8, 16, 9, 17, 10, 18, 11, 19,
                    12, 20, 13, 21, 14, 22, 15, 23, 24, 25, 26, 28, 27, 29, 30, 31)

KINDS = ("none", "puncture", "shorten", "repeat")


class RateMatchError(ValueError):
    pass


@dataclass(frozen=True)
class RateMatchScheme:
    kind: str
    N: int
    M: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RateMatchError(f"unknown rate-matching kind {self.kind!r}")
        log2_exact(self.N)
        if self.M == self.N:
            return
        if self.kind in ("puncture", "shorten") and not 0 < self.M < self.N:
            raise RateMatchError(f"{self.kind} needs 0 < M < N (M={self.M}, N={self.N})")
        if self.kind == "repeat" and not self.N < self.M <= 2 * self.N:
            raise RateMatchError(f"repeat needs N < M <= 2N (M={self.M}, N={self.N})")
        if self.kind == "none":
            raise RateMatchError("kind 'none' needs M = N")


def interleaver_map(N: int) -> np.ndarray:
    """``J`` with ``y[n] = c[J[n]]``; identity below 32."""
    log2_exact(N)
    if N < 32:
        return np.arange(N)
    if N % 32:
        raise RateMatchError("sub-block interleaving needs N divisible by 32")
    b = N // 32
    n = np.arange(N)
    return np.asarray(SUBBLOCK_PATTERN)[n // b] * b + n % b


def subblock_interleave(c) -> np.ndarray:
    arr = np.asarray(c)
    return arr[..., interleaver_map(arr.shape[-1])]


def subblock_deinterleave(y) -> np.ndarray:
    arr = np.asarray(y)
    out = np.empty_like(arr)
    out[..., interleaver_map(arr.shape[-1])] = arr
    return out


def rate_match(c, scheme: RateMatchScheme) -> np.ndarray:
    """Interleave and cut/extend the codeword to length M."""
    bits = as_bits(c, scheme.N)
    y = subblock_interleave(bits)
    N, M = scheme.N, scheme.M
    if M == N:
        return y
    if scheme.kind == "puncture":
        return y[..., N - M:]
    if scheme.kind == "shorten":
        return y[..., :M]
    return np.concatenate([y, y[..., :M - N]], axis=-1)


def derate_llr(rx_llr, scheme: RateMatchScheme) -> np.ndarray:
    """Map received LLRs back to mother-code order.

    Punctured positions read 0, shortened ones +LLR_MAX and repeated copies
    are summed.
    """
    rx = np.asarray(rx_llr, dtype=float)
    N, M = scheme.N, scheme.M
    if rx.shape[-1] != M:
        raise RateMatchError(f"expected {M} LLRs, got {rx.shape[-1]}")
    lead = rx.shape[:-1]
    if M == N:
        z = rx
    elif scheme.kind == "puncture":
        z = np.concatenate([np.zeros(lead + (N - M,)), rx], axis=-1)
    elif scheme.kind == "shorten":
        z = np.concatenate([rx, np.full(lead + (N - M,), LLR_MAX)], axis=-1)
    else:
        z = rx[..., :N].copy()
        z[..., :M - N] += rx[..., N:]
        z = np.clip(z, -LLR_MAX, LLR_MAX)
    return subblock_deinterleave(z)


def removed_positions(scheme: RateMatchScheme) -> np.ndarray:
    """Mother-codeword indices that are not transmitted (puncture/shorten)."""
    N, M = scheme.N, scheme.M
    J = interleaver_map(N)
    if M == N or scheme.kind in ("none", "repeat"):
        return np.zeros(0, dtype=np.int64)
    return np.sort(J[:N - M] if scheme.kind == "puncture" else J[M:])


def _upward_closure(positions, N: int) -> np.ndarray:
    # c_j is the XOR of u_i over all i whose bits contain j, so c_j = 0 for every
    # message requires u_i = 0 for every such i.
    mask = np.zeros(N, dtype=bool)
    idx = np.arange(N)
    for j in positions:
        mask |= (idx & j) == j
    return np.flatnonzero(mask)


def prefrozen_indices(scheme: RateMatchScheme) -> np.ndarray:
    """Input indices frozen up front for the rate-matching scheme.

    Shortening freezes every input that reaches a shortened position.
    Puncturing freezes the inputs with the punctured indices.
    """
    removed = removed_positions(scheme)
    if removed.size == 0:
        return removed
    if scheme.kind == "shorten":
        return _upward_closure(removed, scheme.N)
    return removed


def shortened_frozen_adjust(spec: CodeSpec, scheme: RateMatchScheme,
                            seq: ReliabilitySequence | None = None) -> CodeSpec:
    """Re-select the information set around the scheme's pre-frozen inputs.

    The returned spec keeps K; the information set is rebuilt from the
    reliability order with the pre-frozen indices excluded.  Schemes that
    remove nothing return ``spec`` unchanged.
    """
    if scheme.N != spec.N:
        raise RateMatchError("scheme and code disagree on N")
    pre = prefrozen_indices(scheme)
    if pre.size == 0:
        return spec
    if spec.K > scheme.M or spec.K > spec.N - pre.size:
        raise InvalidDimensionError(f"K={spec.K} does not fit after pre-freezing {pre.size} inputs")
    return CodeSpec(spec.N, spec.K, best_indices(spec.N, spec.K, seq, exclude=pre))


def mother_length(M: int, kind: str, n0: int | None = None) -> int:
    """Mother code length for a target M: the next power of two at or above M
    for puncture/shorten, the given ``n0`` (or largest power below M) for
    repetition and extension."""
    if kind in ("puncture", "shorten", "none"):
        return 1 << (M - 1).bit_length()
    if n0 is not None:
        return n0
    return 1 << (M.bit_length() - 1)
