"""Rate profiling of layered codes: index-set design, exhaustive DEGA upper-bound
search and the greedy crossing-point search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dega import _cached_levels, extended_error_prob, sc_error_prob
from .deep import DeepCodeSpec, LayerSpec
from .gf2 import CrcPoly, log2_exact
from .polar import InvalidDimensionError, ReliabilitySequence, best_indices, nr_sequence

LayerDesigner = Callable[[int, int], np.ndarray]


class InfeasibleProfileError(ValueError):
    pass


def default_layer_designer(seq: ReliabilitySequence | None = None) -> LayerDesigner:
    """Layer information sets from a reliability sequence.

    The layer code is decoded on its reversed codeword as a standard polar
    code, so the ``k`` best indices of that standard code are mapped back
    through the reversal ``i -> n - 1 - i``.
    """
    seq = seq or nr_sequence()

    def design(n: int, k: int) -> np.ndarray:
        return np.sort(n - 1 - best_indices(n, k, seq))

    return design


@dataclass(frozen=True, eq=False)
class IndexSets:
    i0: np.ndarray
    a_sets: tuple
    f0: np.ndarray
    layer_info: tuple


def design_index_sets(n0: int, k0: int, layer_n, layer_k=None, *,
                      seq: ReliabilitySequence | None = None,
                      designer: LayerDesigner | None = None) -> IndexSets:
    """I_0 takes the ``k0`` most reliable indices, A_1 the next N_1, and so on.

    ``layer_k`` (one per layer) feeds the per-layer designer; when omitted the
    layer information sets are empty.
    """
    seq = seq or nr_sequence()
    layer_n = [int(x) for x in layer_n]
    layer_k = [0] * len(layer_n) if layer_k is None else [int(x) for x in layer_k]
    if len(layer_k) != len(layer_n):
        raise InvalidDimensionError("one layer dimension per layer length is required")
    if k0 < 0 or k0 + sum(layer_n) > n0:
        raise InfeasibleProfileError(f"K_0 + sum(N_q) = {k0 + sum(layer_n)} exceeds N_0 = {n0}")
    designer = designer or default_layer_designer(seq)
    order = seq.restrict(n0)
    i0 = np.sort(order[:k0])
    idx = k0
    a_sets, infos = [], []
    for nq, kq in zip(layer_n, layer_k):
        if not 0 <= kq <= nq:
            raise InvalidDimensionError(f"layer dimension {kq} outside [0, {nq}]")
        a_sets.append(np.sort(order[idx:idx + nq]))
        infos.append(np.asarray(designer(nq, kq), dtype=np.int64))
        idx += nq
    f0 = np.sort(order[idx:])
    return IndexSets(i0, tuple(a_sets), f0, tuple(infos))


def build_deep_spec(n0: int, k_list, layer_n, *, seq: ReliabilitySequence | None = None,
                    crc: CrcPoly | None = None,
                    designer: LayerDesigner | None = None) -> DeepCodeSpec:
    """DeepCodeSpec for the split ``k_list = (K_0, ..., K_Q)`` via :func:`design_index_sets`."""
    k_list = [int(k) for k in k_list]
    sets = design_index_sets(n0, k_list[0], layer_n, k_list[1:], seq=seq, designer=designer)
    layers = tuple(LayerSpec(int(n), k, info)
                   for n, k, info in zip(layer_n, k_list[1:], sets.layer_info))
    return DeepCodeSpec(n0, sets.i0, layers, sets.a_sets, crc)


def feasible_splits(n0: int, layer_n, K: int):
    """Every (K_0, ..., K_Q) with the given total that fits the index budget."""
    layer_n = [int(x) for x in layer_n]
    k0_max = n0 - sum(layer_n)
    if k0_max < 0:
        raise InfeasibleProfileError("connection sets alone overflow N_0")
    if not 0 <= K <= k0_max + sum(layer_n):
        raise InfeasibleProfileError(f"K={K} is not achievable with N_0={n0}, layers={layer_n}")
    for tail in itertools.product(*(range(n + 1) for n in layer_n)):
        k0 = K - sum(tail)
        if 0 <= k0 <= k0_max:
            yield (k0, *tail)


@dataclass
class ProfileResult:
    k_list: tuple
    pe0: float
    pe_ub: float
    evaluations: int
    grid: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def grid_csv(self) -> str:
        if not self.grid:
            return ""
        Q = len(self.k_list) - 1
        head = ",".join(f"K{q}" for q in range(Q + 1)) + ",pe0,pe_ub"
        rows = [",".join(map(str, ks)) + f",{pe0:.6e},{ub:.6e}" for ks, pe0, ub in self.grid]
        return "\n".join([head, *rows]) + "\n"


def exhaustive_rate_profile(n0: int, layer_n, K: int, sigma2: float, *,
                            seq: ReliabilitySequence | None = None,
                            designer: LayerDesigner | None = None) -> ProfileResult:
    """Minimise the DEGA upper bound ``pe_ub`` over every feasible split.

    Exact ties go to the lexicographically largest split.
    """
    layer_n = [int(x) for x in layer_n]
    best = None
    grid = []
    for ks in feasible_splits(n0, layer_n, K):
        spec = build_deep_spec(n0, ks, layer_n, seq=seq, designer=designer)
        est = extended_error_prob(spec, sigma2)
        grid.append((ks, est.pe0, est.pe_ub))
        key = (est.pe_ub, tuple(-k for k in ks))
        if best is None or key < best[0]:
            best = (key, ks, est)
    if best is None:
        raise InfeasibleProfileError("no feasible split")
    _, ks, est = best
    return ProfileResult(tuple(ks), est.pe0, est.pe_ub, len(grid), grid)


def _standalone_pe(n: int, k: int, sigma2: float, seq: ReliabilitySequence) -> float:
    mu = _cached_levels(log2_exact(n), float(sigma2))[-1]
    return sc_error_prob(best_indices(n, k, seq), mu)


def greedy_rate_profile(n0: int, layer_n, K: int, sigma2: float, *,
                        seq: ReliabilitySequence | None = None,
                        designer: LayerDesigner | None = None) -> ProfileResult:
    """Greedy crossing-point search over layers 0..Q-1.

    For each layer ``q`` the dimension is scanned downward and the first
    (largest) ``K_q`` whose standalone SC error estimate drops below that of
    the next layer loaded with ``K_bar`` bits is kept.  The last layer takes
    whatever is left.
    """
    seq = seq or nr_sequence()
    layer_n = [int(x) for x in layer_n]
    sizes = [n0, *layer_n]
    Q = len(layer_n)
    if not 0 <= K <= n0:
        raise InfeasibleProfileError(f"K={K} outside [0, N_0]")
    if next(feasible_splits(n0, layer_n, K), None) is None:
        raise InfeasibleProfileError(f"K={K} has no feasible split")
    chosen = []
    evaluations = 0
    fallbacks = []
    for q in range(Q):
        rem = K - sum(chosen)
        tail_cap = sum(sizes[q + 1:])
        top = sizes[q] if q else n0 - sum(layer_n)
        pick = None
        smallest = None
        for kq in range(top, 0, -1):
            if rem - kq > tail_cap:
                break
            if kq > rem:
                continue
            smallest = kq
            # at least one bit is reserved for every later layer; a non-positive
            # K_bar is compared against the weakest non-trivial next-layer code
            k_bar = max(1, min(sizes[q + 1], rem - kq - (Q - q)))
            evaluations += 1
            pe_q = _standalone_pe(sizes[q], kq, sigma2, seq)
            pe_next = _standalone_pe(sizes[q + 1], k_bar, sigma2, seq)
            if pe_q < pe_next:
                pick = kq
                break
        if pick is None:
            pick = smallest if smallest is not None else 0
            if rem - pick > tail_cap:
                pick = rem - tail_cap
            fallbacks.append(q)
        chosen.append(pick)
    last = K - sum(chosen)
    chosen.append(last)
    if not 0 <= chosen[-1] <= sizes[-1]:
        raise InfeasibleProfileError(f"greedy split {chosen} leaves an infeasible last layer")
    spec = build_deep_spec(n0, chosen, layer_n, seq=seq, designer=designer)
    est = extended_error_prob(spec, sigma2)
    return ProfileResult(tuple(chosen), est.pe0, est.pe_ub, evaluations,
                         diagnostics={"fallback_layers": fallbacks})
