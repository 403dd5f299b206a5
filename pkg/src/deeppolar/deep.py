"""Layered (deep) polar codes built by polar coded extension.

Layer ``q >= 1`` encodes ``m_q`` with the transposed transform; its codeword
occupies the layer-0 inputs ``A_q`` (ascending position = ascending codeword
index) and is also transmitted after the layer-0 codeword.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decode import (
    ConfigurationError,
    DeepLayerView,
    modified_scl_decode_batch,
    select_by_crc,
    soscl_decode_batch,
)
from .gf2 import (
    CRC11, CrcPoly, as_bits, crc_attach, log2_exact, polar_transform, polar_transform_transposed,
)
from .polar import CodeSpec, InvalidDimensionError


class SpecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LayerSpec:
    """One pre-transform layer: ``info_set`` indexes the layer input ``u_q``."""

    n: int
    k: int
    info_set: np.ndarray

    def __post_init__(self):
        log2_exact(self.n)
        info = np.unique(np.asarray(self.info_set, dtype=np.int64))
        if info.size != self.k or (info.size and (info[0] < 0 or info[-1] >= self.n)):
            raise SpecError(f"layer info set does not match (N={self.n}, K={self.k})")
        info.setflags(write=False)
        object.__setattr__(self, "info_set", info)

    @property
    def frozen_set(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n), self.info_set)

    def decoder_spec(self) -> CodeSpec:
        """Standard polar code seen on the reversed codeword segment."""
        return CodeSpec(self.n, self.k, self.n - 1 - self.info_set)


@dataclass(frozen=True, eq=False)
class DeepCodeSpec:
    n0: int
    i0: np.ndarray
    layers: tuple = ()
    a_sets: tuple = ()
    crc: CrcPoly | None = None
    f0: np.ndarray = field(init=False)

    def __post_init__(self):
        log2_exact(self.n0)
        i0 = np.unique(np.asarray(self.i0, dtype=np.int64))
        if i0.size != len(self.i0):
            raise SpecError("duplicate entries in I_0")
        layers = tuple(self.layers)
        a_sets = tuple(np.asarray(a, dtype=np.int64) for a in self.a_sets)
        if len(layers) != len(a_sets):
            raise SpecError("one connection set is needed per layer")
        for layer, a in zip(layers, a_sets):
            if a.size != layer.n:
                raise SpecError(f"|A_q| = {a.size} but N_q = {layer.n}")
            if layer.n > self.n0:
                raise SpecError("layer length exceeds N_0")
            if np.any(np.diff(a) <= 0):
                raise SpecError("connection sets must be strictly ascending")
        used = np.concatenate([i0, *a_sets]) if a_sets else i0
        if np.unique(used).size != used.size:
            raise SpecError("I_0 and the connection sets overlap")
        if used.size and (used.min() < 0 or used.max() >= self.n0):
            raise SpecError("index outside [0, N_0)")
        for a in a_sets:
            a.setflags(write=False)
        i0.setflags(write=False)
        f0 = np.setdiff1d(np.arange(self.n0), used)
        f0.setflags(write=False)
        object.__setattr__(self, "i0", i0)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "a_sets", a_sets)
        object.__setattr__(self, "f0", f0)
        if self.crc is not None and self.K <= self.crc.degree:
            raise SpecError("dimension must exceed the CRC length")

    @property
    def Q(self) -> int:
        return len(self.layers)

    @property
    def k_list(self) -> list[int]:
        return [int(self.i0.size)] + [layer.k for layer in self.layers]

    @property
    def n_list(self) -> list[int]:
        return [self.n0] + [layer.n for layer in self.layers]

    @property
    def K(self) -> int:
        """Total dimension including CRC bits."""
        return sum(self.k_list)

    @property
    def payload_k(self) -> int:
        return self.K - (self.crc.degree if self.crc is not None else 0)

    @property
    def M(self) -> int:
        return sum(self.n_list)

    @property
    def rate(self) -> float:
        return self.payload_k / self.M

    def layer_view(self) -> DeepLayerView:
        return DeepLayerView(self.n0, self.i0, self.a_sets,
                             tuple(layer.info_set for layer in self.layers))

    def to_dict(self) -> dict:
        return {
            "n0": self.n0,
            "layers": [{"n": layer.n, "k": layer.k, "info_set": layer.info_set.tolist()}
                       for layer in self.layers],
            "a_sets": [a.tolist() for a in self.a_sets],
            "i0": self.i0.tolist(),
            "crc": None if self.crc is None else self.crc.name or list(self.crc.coefficients),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeepCodeSpec":
        try:
            layers = tuple(LayerSpec(int(x["n"]), int(x["k"]), x["info_set"]) for x in d["layers"])
            crc = d.get("crc")
            if crc in (None, False):
                poly = None
            elif crc in ("crc11", True):
                poly = CRC11
            else:
                poly = CrcPoly(tuple(int(c) for c in crc))
            return cls(int(d["n0"]), d["i0"], layers, tuple(d["a_sets"]), poly)
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed spec document: {exc!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DeepCodeSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "DeepCodeSpec":
        return cls.from_json(Path(path).read_text())


def decompose_extension(M: int, n0: int) -> list[int]:
    """Powers of two summing to ``M - N_0``, largest first."""
    log2_exact(n0)
    if not n0 < M < 2 * n0:
        raise InvalidDimensionError(f"extension needs N_0 < M < 2 N_0, got M={M}, N_0={n0}")
    extra = M - n0
    return [1 << b for b in range(extra.bit_length() - 1, -1, -1) if extra >> b & 1]


def split_message(spec: DeepCodeSpec, m) -> list[np.ndarray]:
    """Contiguous split of ``m`` (length K, CRC included) into per-layer parts."""
    bits = as_bits(m, spec.K)
    cuts = np.cumsum(spec.k_list)[:-1]
    return np.split(bits, cuts, axis=-1)


def attach_crc(spec: DeepCodeSpec, payload) -> np.ndarray:
    bits = as_bits(payload, spec.payload_k)
    return crc_attach(bits, spec.crc) if spec.crc is not None else bits


def deep_encode(spec: DeepCodeSpec, m) -> np.ndarray:
    """Encode ``m`` (length K, CRC already attached if any) to length M.

    Accepts a batch of messages on the leading axes.
    """
    parts = split_message(spec, m)
    lead = parts[0].shape[:-1]
    u0 = np.zeros(lead + (spec.n0,), dtype=np.uint8)
    u0[..., spec.i0] = parts[0]
    layer_cw = []
    for layer, a, mq in zip(spec.layers, spec.a_sets, parts[1:]):
        uq = np.zeros(lead + (layer.n,), dtype=np.uint8)
        uq[..., layer.info_set] = mq
        cq = polar_transform_transposed(uq)
        u0[..., a] = cq
        layer_cw.append(cq)
    return np.concatenate([polar_transform(u0), *layer_cw], axis=-1)


def invert_pretransform(c_q, layer: LayerSpec) -> np.ndarray:
    """Message bits of a layer from its codeword (the transposed transform is
    its own inverse)."""
    bits = as_bits(c_q, layer.n)
    return polar_transform_transposed(bits)[..., layer.info_set]


@dataclass
class DeepDecodeResult:
    messages: np.ndarray
    crc_failed: np.ndarray
    metrics: np.ndarray
    soft: np.ndarray


def deep_decode_batch(spec: DeepCodeSpec, llr, list_size: int, *, layer_list: int | None = None,
                      mode: str = "dynamic", use_crc: bool = True,
                      minsum: bool = False) -> DeepDecodeResult:
    """Decode a batch of frames (B, M).

    Each layer's segment is decoded with soft-output SCL (``layer_list``
    paths, defaulting to ``list_size``); its soft output is embedded at the
    layer's connection positions and the layer-0 decoder combines it.
    Returned messages include any CRC bits.
    """
    llr = np.atleast_2d(np.asarray(llr, dtype=float))
    if llr.shape[-1] != spec.M:
        raise ValueError(f"LLR length {llr.shape[-1]} does not match M={spec.M}")
    B = llr.shape[0]
    layer_list = layer_list or list_size
    lam = np.zeros((B, spec.n0))
    off = spec.n0
    for layer, a in zip(spec.layers, spec.a_sets):
        seg = llr[:, off:off + layer.n][:, ::-1]
        _, _, soft = soscl_decode_batch(layer.decoder_spec(), seg, layer_list, minsum)
        lam[:, a] = soft[:, ::-1]
        off += layer.n
    view = spec.layer_view()
    u0, pm = modified_scl_decode_batch(view, llr[:, :spec.n0], lam, list_size,
                                       mode=mode, minsum=minsum)
    msgs = view.messages(u0)
    idx = np.zeros(B, dtype=np.int64)
    failed = np.zeros(B, dtype=bool)
    if spec.crc is not None and use_crc:
        idx, failed = select_by_crc(msgs, spec.crc)
    chosen = msgs[np.arange(B), idx]
    return DeepDecodeResult(chosen, failed, pm[np.arange(B), idx], lam)


def deep_decode(spec: DeepCodeSpec, llr, list_size: int = 1, crc: bool = True,
                mode: str = "dynamic", minsum: bool = False):
    """Decode one frame; returns ``(m_hat, diagnostics)`` with ``m_hat`` the
    full K-bit message (CRC bits included when the spec carries a CRC)."""
    llr = np.asarray(llr, dtype=float)
    if llr.ndim != 1:
        raise ValueError("deep_decode expects a single frame; use deep_decode_batch")
    res = deep_decode_batch(spec, llr[None, :], list_size, mode=mode, use_crc=crc, minsum=minsum)
    diag = {"crc_failed": bool(res.crc_failed[0]), "path_metric": float(res.metrics[0]),
            "soft": res.soft[0]}
    return res.messages[0], diag


__all__ = [
    "ConfigurationError", "DeepCodeSpec", "DeepDecodeResult", "DeepLayerView", "LayerSpec",
    "SpecError", "attach_crc", "decompose_extension", "deep_decode", "deep_decode_batch",
    "deep_encode", "invert_pretransform", "split_message",
]
