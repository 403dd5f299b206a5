"""Successive-cancellation decoders in the LLR domain.

One tree engine serves every decoder here.  It runs a batch of frames at once
and keeps up to ``L`` paths per frame, so plain SC is simply the ``L = 1``
case.  Leaves are frozen, information, or dynamically frozen (value forced to
a GF(2) parity of earlier decisions); an optional soft vector can be added to
the leaf LLR before the path-metric update, and an optional backward pass
returns per-path extrinsic messages for soft output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf2 import CRC11, CrcPoly, crc_verify, polar_transform, polar_transform_transposed
from .polar import CodeSpec

LLR_MAX = 40.0

LEAF_FROZEN = 0
LEAF_INFO = 1
LEAF_DYNAMIC = 2


class ConfigurationError(ValueError):
    pass


def _softplus(x):
    return np.logaddexp(0.0, x)


def f_llr(x, y, minsum: bool = False):
    """Check-node update ``log((1 + e^{x+y}) / (e^x + e^y))``.

    Evaluated as the min-sum term plus two bounded corrections, which is exact
    and does not overflow.  ``minsum=True`` drops the corrections.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.sign(x) * np.sign(y) * np.minimum(np.abs(x), np.abs(y))
    if minsum:
        return out
    return out + np.log1p(np.exp(-np.abs(x + y))) - np.log1p(np.exp(-np.abs(x - y)))


def _f_ext(x, y):
    # f_llr that also accepts +-inf (extrinsic messages from frozen leaves).
    with np.errstate(invalid="ignore"):
        s = np.sign(x) * np.sign(y)
        m = np.minimum(np.abs(x), np.abs(y))
        corr = np.log1p(np.exp(-np.abs(x + y))) - np.log1p(np.exp(-np.abs(x - y)))
    corr = np.where(np.isnan(corr), 0.0, corr)
    return s * m + corr


def g_llr(x, y, u):
    """Variable-node update ``(1 - 2u) x + y``, saturated at +-LLR_MAX."""
    u = np.asarray(u)
    if np.any((u != 0) & (u != 1)):
        raise ValueError("decision bit must be 0 or 1")
    return np.clip((1 - 2 * u) * np.asarray(x, dtype=float) + y, -LLR_MAX, LLR_MAX)


def pm_update(pm, leaf_llr, u_hat):
    """Path-metric increment ``log(1 + exp(-(1 - 2u) L))`` added to ``pm``."""
    return pm + _softplus(-(1 - 2 * np.asarray(u_hat)) * np.asarray(leaf_llr, dtype=float))


def clamp_llr(llr):
    llr = np.asarray(llr, dtype=float)
    if not np.all(np.isfinite(llr)):
        raise ValueError("LLR frame contains non-finite values")
    return np.clip(llr, -LLR_MAX, LLR_MAX)


@dataclass(frozen=True, eq=False)
class LeafPlan:
    """Per-leaf behaviour of the tree engine for one code."""

    kind: np.ndarray
    combine: np.ndarray
    track_col: np.ndarray
    deps: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.kind.size

    @property
    def n_tracked(self) -> int:
        return int(self.track_col.max()) + 1 if self.track_col.size else 0

    @classmethod
    def plain(cls, spec: CodeSpec) -> "LeafPlan":
        kind = np.full(spec.N, LEAF_FROZEN, dtype=np.int8)
        kind[spec.info_set] = LEAF_INFO
        return cls(kind, np.zeros(spec.N, bool), np.full(spec.N, -1))


class _TreeEngine:
    def __init__(self, plan: LeafPlan, list_size: int, *, soft: bool = False,
                 minsum: bool = False, need_metrics: bool = True):
        if list_size < 1:
            raise ValueError("list size must be >= 1")
        self.plan = plan
        self.L = int(list_size)
        self.soft = soft
        self.minsum = minsum
        # Without metrics or soft output an all-frozen subtree is just zeros.
        self.skip_rate0 = (self.L == 1 and not need_metrics and not soft)
        N = plan.N
        self._rate0 = {}
        if self.skip_rate0:
            plain_frozen = (plan.kind == LEAF_FROZEN)
            size = N
            while size >= 1:
                blocks = plain_frozen.reshape(-1, size).all(axis=1)
                for k in np.flatnonzero(blocks):
                    self._rate0[(int(k) * size, size)] = True
                size //= 2

    def run(self, llr: np.ndarray, lam: np.ndarray | None = None):
        B, N = llr.shape
        if N != self.plan.N:
            raise ValueError(f"LLR length {N} does not match code length {self.plan.N}")
        self.B = B
        self.bidx = np.arange(B)[:, None]
        self.lam = lam
        self.pm = np.zeros((B, 1))
        self.track = np.zeros((B, 1, self.plan.n_tracked), dtype=np.uint8)
        beta, _, R = self._node(llr[:, None, :], 0)
        order = np.argsort(self.pm, axis=1, kind="stable")
        pm = np.take_along_axis(self.pm, order, axis=1)
        beta = beta[self.bidx, order]
        u = polar_transform(beta)
        if R is not None:
            R = R[self.bidx, order]
        return u, pm, R

    def _gather(self, x, org):
        return x[self.bidx, org]

    def _node(self, alpha, lo):
        size = alpha.shape[-1]
        if size == 1:
            return self._leaf(alpha[..., 0], lo)
        if self.skip_rate0 and (lo, size) in self._rate0:
            return np.zeros(alpha.shape, dtype=np.uint8), None, None
        h = size // 2
        a = alpha[..., :h]
        b = alpha[..., h:]
        beta_l, org_l, R_l = self._node(f_llr(a, b, self.minsum), lo)
        if org_l is not None:
            a = self._gather(a, org_l)
            b = self._gather(b, org_l)
        right_in = np.clip(b + (1.0 - 2.0 * beta_l) * a, -LLR_MAX, LLR_MAX)
        beta_r, org_r, R_r = self._node(right_in, lo + h)
        if org_r is not None:
            beta_l = self._gather(beta_l, org_r)
            if self.soft:
                a = self._gather(a, org_r)
                b = self._gather(b, org_r)
                R_l = self._gather(R_l, org_r)
            org = org_r if org_l is None else np.take_along_axis(org_l, org_r, axis=1)
        else:
            org = org_l
        beta = np.concatenate([beta_l ^ beta_r, beta_r], axis=-1)
        R = None
        if self.soft:
            R = np.concatenate([_f_ext(R_l, R_r + b), _f_ext(R_l, a) + R_r], axis=-1)
        return beta, org, R

    def _leaf(self, llr, i):
        plan = self.plan
        kind = plan.kind[i]
        lt = llr + self.lam[:, i, None] if plan.combine[i] else llr
        org = None
        if kind == LEAF_FROZEN:
            bits = np.zeros(llr.shape, dtype=np.uint8)
            self.pm = self.pm + _softplus(-lt)
        elif kind == LEAF_DYNAMIC:
            cols = plan.deps[i]
            bits = (self.track[..., cols].sum(axis=-1) & 1).astype(np.uint8)
            self.pm = self.pm + _softplus(-(1.0 - 2.0 * bits) * lt)
        else:
            P = llr.shape[1]
            cand = np.stack([self.pm + _softplus(-lt), self.pm + _softplus(lt)], axis=-1)
            if self.L == 1:
                bits = (cand[..., 1] < cand[..., 0]).astype(np.uint8)
                self.pm = np.where(bits == 1, cand[..., 1], cand[..., 0])
            else:
                cand = cand.reshape(self.B, 2 * P)
                if 2 * P <= self.L:
                    sel = np.broadcast_to(np.arange(2 * P), cand.shape)
                    self.pm = cand
                else:
                    sel = np.argsort(cand, axis=1, kind="stable")[:, :self.L]
                    self.pm = np.take_along_axis(cand, sel, axis=1)
                org = sel // 2
                bits = (sel % 2).astype(np.uint8)
                if self.track.shape[-1]:
                    self.track = self._gather(self.track, org)
        col = plan.track_col[i]
        if col >= 0:
            self.track[..., col] = bits
        R = None
        if self.soft:
            R = np.full(bits.shape + (1,), np.inf if kind != LEAF_INFO else 0.0)
        return bits[..., None], org, R


def _as_batch(llr, N):
    arr = clamp_llr(llr)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != N:
        raise ValueError(f"LLR length {arr.shape[-1]} does not match code length {N}")
    return arr, single


def sc_decode(spec: CodeSpec, llr, minsum: bool = False) -> np.ndarray:
    """SC decoding; returns the estimated input vector u (frozen leaves are 0).

    Ties (leaf LLR exactly 0) decide 0.  ``llr`` may be a batch of frames.
    """
    arr, single = _as_batch(llr, spec.N)
    eng = _TreeEngine(LeafPlan.plain(spec), 1, minsum=minsum, need_metrics=False)
    u, _, _ = eng.run(arr)
    u = u[:, 0]
    return u[0] if single else u


@dataclass
class SclResult:
    """Decoder output list, ascending in path metric."""

    paths: np.ndarray
    metrics: np.ndarray
    selected: int = 0
    crc_failed: bool = False

    def __iter__(self):
        return iter(zip(self.paths, self.metrics))

    def __len__(self):
        return len(self.metrics)

    @property
    def best(self) -> np.ndarray:
        return self.paths[self.selected]


def scl_decode_batch(spec: CodeSpec, llr, list_size: int, minsum: bool = False):
    """Batched SCL: returns ``(u, pm)`` with shapes (B, P, N) and (B, P)."""
    arr, _ = _as_batch(llr, spec.N)
    u, pm, _ = _TreeEngine(LeafPlan.plain(spec), list_size, minsum=minsum).run(arr)
    return u, pm


def select_by_crc(messages: np.ndarray, poly: CrcPoly):
    """Index of the first list entry whose message passes the CRC, per frame.

    Returns ``(index, failed)``; frames with no passing entry fall back to 0.
    """
    ok = crc_verify(messages, poly)
    ok = np.atleast_2d(ok)
    failed = ~ok.any(axis=1)
    idx = np.where(failed, 0, ok.argmax(axis=1))
    return idx, failed


def scl_decode(spec: CodeSpec, llr, list_size: int, crc: CrcPoly | None = None,
               minsum: bool = False) -> SclResult:
    """Single-frame SCL.  With ``crc`` the selected path is the lowest-metric
    one whose payload (information bits in ascending order) passes the CRC."""
    u, pm = scl_decode_batch(spec, np.asarray(llr)[None, :], list_size, minsum)
    u, pm = u[0], pm[0]
    res = SclResult(u, pm)
    if crc is not None and spec.K > crc.degree:
        idx, failed = select_by_crc(u[:, spec.info_set], crc)
        res.selected, res.crc_failed = int(idx[0]), bool(failed[0])
    return res


def aggregate_soft(llr0: np.ndarray, R: np.ndarray, pm: np.ndarray) -> np.ndarray:
    """Mix per-path soft outputs ``L0 + R`` with weights ``exp(-pm)``.

    Shapes: llr0 (B, N), R (B, P, N), pm (B, P).  Mixing happens in the
    probability domain; the result is clamped to +-LLR_MAX.
    """
    per_path = np.clip(llr0[:, None, :] + R, -LLR_MAX, LLR_MAX)
    logw = -pm[..., None]
    num = np.logaddexp.reduce(logw - _softplus(-per_path), axis=1)
    den = np.logaddexp.reduce(logw - _softplus(per_path), axis=1)
    return np.clip(num - den, -LLR_MAX, LLR_MAX)


def soscl_decode_batch(spec: CodeSpec, llr, list_size: int, minsum: bool = False):
    """Batched soft-output SCL: returns (u (B,P,N), pm (B,P), Lambda (B,N))."""
    arr, _ = _as_batch(llr, spec.N)
    u, pm, R = _TreeEngine(LeafPlan.plain(spec), list_size, soft=True, minsum=minsum).run(arr)
    return u, pm, aggregate_soft(arr, R, pm)


def soscl_decode(spec: CodeSpec, llr, list_size: int, minsum: bool = False):
    """Soft-output SCL for one frame: ``(best u, Lambda)``."""
    u, _, lam = soscl_decode_batch(spec, np.asarray(llr)[None, :], list_size, minsum)
    return u[0, 0], lam[0]


@dataclass(frozen=True, eq=False)
class DeepLayerView:
    """What the layer-0 decoder needs to know about a layered code.

    ``a_sets[q]`` lists the layer-0 input positions carrying layer ``q+1``'s
    codeword bits in ascending order; ``layer_info[q]`` is that layer's
    information set in pre-transform input order.
    """

    n0: int
    i0: np.ndarray
    a_sets: tuple
    layer_info: tuple

    def __post_init__(self):
        used = np.concatenate([np.asarray(self.i0, dtype=np.int64)]
                              + [np.asarray(a, dtype=np.int64) for a in self.a_sets])
        if used.size != np.unique(used).size or (used.size and used.max() >= self.n0):
            raise ConfigurationError("layer-0 index sets overlap or exceed N_0")

    @property
    def connection_mask(self) -> np.ndarray:
        mask = np.zeros(self.n0, dtype=bool)
        for a in self.a_sets:
            mask[np.asarray(a, dtype=np.int64)] = True
        return mask

    def leaf_plan(self, mode: str = "dynamic") -> LeafPlan:
        if mode not in ("dynamic", "free"):
            raise ConfigurationError(f"unknown connection mode {mode!r}")
        kind = np.full(self.n0, LEAF_FROZEN, dtype=np.int8)
        kind[np.asarray(self.i0, dtype=np.int64)] = LEAF_INFO
        combine = np.zeros(self.n0, dtype=bool)
        track_col = np.full(self.n0, -1)
        deps = {}
        col = 0
        for a, info in zip(self.a_sets, self.layer_info):
            a = np.asarray(a, dtype=np.int64)
            nq = a.size
            is_info = np.zeros(nq, dtype=bool)
            is_info[np.asarray(info, dtype=np.int64)] = True
            cols = col + np.arange(nq)
            track_col[a] = cols
            for j in range(nq):
                pos = a[j]
                if is_info[j]:
                    kind[pos] = LEAF_INFO
                    combine[pos] = True
                elif mode == "free":
                    kind[pos] = LEAF_INFO
                else:
                    kind[pos] = LEAF_DYNAMIC
                    # u_{q,j} = 0 pins c_{q,j} to the XOR of c_{q,i} over i strictly inside j.
                    sub = [i for i in range(j) if (i & j) == i]
                    deps[int(pos)] = cols[sub]
            col += nq
        return LeafPlan(kind, combine, track_col, deps)

    def messages(self, u0: np.ndarray) -> np.ndarray:
        """Recover the full message (layer 0 first) from layer-0 inputs.

        Works on any leading batch shape.
        """
        parts = [u0[..., np.asarray(self.i0, dtype=np.int64)]]
        for a, info in zip(self.a_sets, self.layer_info):
            c_q = u0[..., np.asarray(a, dtype=np.int64)]
            parts.append(polar_transform_transposed(c_q)[..., np.asarray(info, dtype=np.int64)])
        return np.concatenate(parts, axis=-1)


def modified_scl_decode_batch(view: DeepLayerView, llr, lam, list_size: int, *,
                              mode: str = "dynamic", minsum: bool = False):
    """Batched layer-0 decoder with embedded soft information.

    ``lam`` is (B, N_0) and must be zero off the connection positions.  Returns
    (u0 (B,P,N_0), pm (B,P)).
    """
    arr, _ = _as_batch(llr, view.n0)
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    if lam.shape != arr.shape:
        raise ConfigurationError(f"soft vector shape {lam.shape} does not match LLRs {arr.shape}")
    if np.any(lam[:, ~view.connection_mask] != 0):
        raise ConfigurationError("soft information present at a non-connection index")
    plan = view.leaf_plan(mode)
    u, pm, _ = _TreeEngine(plan, list_size, minsum=minsum).run(arr, lam)
    return u, pm


def modified_scl_decode(view: DeepLayerView, llr, lam, list_size: int,
                        crc: CrcPoly | None = None, *, mode: str = "dynamic",
                        minsum: bool = False) -> SclResult:
    """Single-frame layer-0 decoding; CRC selection runs on recovered messages."""
    u, pm = modified_scl_decode_batch(view, np.asarray(llr)[None, :], np.asarray(lam)[None, :],
                                      list_size, mode=mode, minsum=minsum)
    res = SclResult(u[0], pm[0])
    if crc is not None:
        msgs = view.messages(u[0])
        if msgs.shape[-1] > crc.degree:
            idx, failed = select_by_crc(msgs, crc)
            res.selected, res.crc_failed = int(idx[0]), bool(failed[0])
    return res


__all__ = [
    "LLR_MAX", "CRC11", "ConfigurationError", "DeepLayerView", "LeafPlan", "SclResult",
    "aggregate_soft", "clamp_llr", "f_llr", "g_llr", "modified_scl_decode",
    "modified_scl_decode_batch", "pm_update", "sc_decode", "scl_decode", "scl_decode_batch",
    "select_by_crc", "soscl_decode", "soscl_decode_batch",
]
