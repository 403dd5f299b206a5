"""Reliability sequences, information-set construction and plain polar encoding."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .gf2 import as_bits, is_power_of_two, log2_exact, polar_transform

NR_SEQUENCE_FILE = "nr_reliability_1024.txt"
NR_SEQUENCE_SHA256 = "bf124fd630a5823f0b1790b458bb0c4c3ac76698b05ae174478a6f787da45c32"


class SequenceParseError(ValueError):
    pass


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReliabilitySequence:
    """Bit-channel indices ordered from most to least reliable."""

    order: np.ndarray
    source: str = "5g"

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        if order.ndim != 1 or not np.array_equal(np.sort(order), np.arange(order.size)):
            raise SequenceParseError("reliability sequence is not a permutation")
        if not is_power_of_two(order.size):
            raise SequenceParseError(f"sequence length {order.size} is not a power of two")
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def n_max(self) -> int:
        return self.order.size

    def restrict(self, N: int) -> np.ndarray:
        """Most-reliable-first order of the indices below ``N``."""
        if N > self.n_max:
            raise InvalidDimensionError(f"sequence covers N <= {self.n_max}, asked for {N}")
        return self.order[self.order < N]


def parse_sequence(text: str, source: str = "file") -> ReliabilitySequence:
    try:
        values = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise SequenceParseError(f"non-integer entry in reliability file: {exc}") from None
    return ReliabilitySequence(np.array(values, dtype=np.int64), source=source)


@lru_cache(maxsize=1)
def nr_sequence() -> ReliabilitySequence:
    """The 1024-entry 5G NR universal reliability sequence (bundled data)."""
    text = resources.files("deeppolar").joinpath("data").joinpath(NR_SEQUENCE_FILE).read_text()
    return parse_sequence(text, source="5g")


def nr_sequence_checksum() -> str:
    raw = resources.files("deeppolar").joinpath("data").joinpath(NR_SEQUENCE_FILE).read_bytes()
    return hashlib.sha256(raw).hexdigest()


def dega_sequence(N: int, sigma2: float) -> ReliabilitySequence:
    """Order indices by descending DEGA leaf mean at noise variance ``sigma2``.

    Ties keep the higher index first.
    """
    from .dega import dega_forward

    mu = dega_forward(log2_exact(N), 2.0 / sigma2)
    idx = np.arange(N)
    order = np.lexsort((-idx, -mu))
    return ReliabilitySequence(order, source=f"dega:{sigma2:g}")


def load_reliability_sequence(source: str | Path = "5g", *, N: int | None = None,
                              sigma2: float | None = None) -> ReliabilitySequence:
    """Load a sequence: ``"5g"`` (bundled), ``"dega"`` (needs N and sigma2), or a file path
    holding one decimal index per line, most reliable first."""
    if source == "5g":
        return nr_sequence()
    if source == "dega":
        if N is None or sigma2 is None:
            raise ValueError("DEGA sequence needs N and sigma2")
        return dega_sequence(N, sigma2)
    return parse_sequence(Path(source).read_text(), source=str(source))


@dataclass(frozen=True, eq=False)
class CodeSpec:
    N: int
    K: int
    info_set: np.ndarray
    frozen_set: np.ndarray = field(init=False)

    def __post_init__(self):
        log2_exact(self.N)
        info = np.unique(np.asarray(self.info_set, dtype=np.int64))
        if info.size != self.K or (info.size and (info[0] < 0 or info[-1] >= self.N)):
            raise InvalidDimensionError("information set does not match (N, K)")
        mask = np.zeros(self.N, dtype=bool)
        mask[info] = True
        info.setflags(write=False)
        frozen = np.flatnonzero(~mask)
        frozen.setflags(write=False)
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "frozen_set", frozen)

    @property
    def n(self) -> int:
        return log2_exact(self.N)

    @property
    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[self.info_set] = True
        return mask

    @property
    def rate(self) -> float:
        return self.K / self.N


def best_indices(N: int, K: int, seq: ReliabilitySequence | None = None,
                 exclude=None) -> np.ndarray:
    """The ``K`` most reliable indices below ``N``, optionally skipping ``exclude``."""
    seq = seq or nr_sequence()
    order = seq.restrict(N)
    if exclude is not None and len(exclude):
        order = order[~np.isin(order, exclude)]
    if K > order.size:
        raise InvalidDimensionError(f"cannot pick {K} indices from {order.size} available")
    return np.sort(order[:K])


def build_code_spec(N: int, K: int, seq: ReliabilitySequence | None = None) -> CodeSpec:
    if not 0 <= K <= N:
        raise InvalidDimensionError(f"dimension K={K} outside [0, {N}]")
    log2_exact(N)
    return CodeSpec(N, K, best_indices(N, K, seq))


def polar_encode(spec: CodeSpec, m) -> np.ndarray:
    """Place ``m`` on the information set (ascending order), zeros elsewhere,
    and apply the polar transform.  Works on a batch of messages too."""
    bits = as_bits(m, spec.K)
    u = np.zeros(bits.shape[:-1] + (spec.N,), dtype=np.uint8)
    u[..., spec.info_set] = bits
    return polar_transform(u)
