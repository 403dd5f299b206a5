"""BPSK/AWGN Monte Carlo block-error-rate simulation and required-SNR extraction.

Every frame draws its message and noise from its own generator seeded with
``(master_seed, snr_index, frame_index)``, and frames are consumed in fixed
chunks in index order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .decode import LLR_MAX, scl_decode_batch, select_by_crc
from .deep import decompose_extension, deep_decode_batch, deep_encode
from .gf2 import CRC11, crc_attach
from .polar import build_code_spec, polar_encode
from .ratematch import (
    RateMatchScheme, derate_llr, mother_length, rate_match, shortened_frozen_adjust,
)

SCHEMES = ("none", "repeat", "puncture", "shorten", "deep")
CSV_FIELDS = ("scheme", "N0", "layers", "M", "K", "crc", "list", "snr_db", "snr_conv",
              "frames", "errors", "bler", "ci_lo", "ci_hi", "seed")


class NoBracketError(ValueError):
    pass


def es_sigma2(snr_db: float) -> float:
    return 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))


def snr_to_sigma2(snr_db: float, conv: str = "es", rate: float = 1.0) -> float:
    """Noise variance per real dimension for unit-energy BPSK."""
    if conv == "es":
        return es_sigma2(snr_db)
    if conv == "eb":
        return 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    raise ValueError(f"unknown SNR convention {conv!r}")


def eb_to_es(snr_db: float, rate: float) -> float:
    return snr_db + 10.0 * np.log10(rate)


def es_to_eb(snr_db: float, rate: float) -> float:
    return snr_db - 10.0 * np.log10(rate)


def awgn_transmit(c, sigma2: float, rng: np.random.Generator | None = None, *,
                  noiseless: bool = False) -> np.ndarray:
    """BPSK ``x = 1 - 2c`` over AWGN; returns clamped channel LLRs ``2y/sigma^2``.

    ``noiseless`` returns ``LLR_MAX * x`` without touching ``rng``.
    """
    x = 1.0 - 2.0 * np.asarray(c, dtype=float)
    if noiseless:
        return LLR_MAX * x
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    y = x + np.sqrt(sigma2) * rng.standard_normal(x.shape)
    return np.clip(2.0 * y / sigma2, -LLR_MAX, LLR_MAX)


def wilson_interval(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    if frames == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + level / 2.0)
    p = errors / frames
    denom = 1.0 + z * z / frames
    centre = (p + z * z / (2 * frames)) / denom
    half = z * np.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == frames else min(1.0, centre + half)
    return float(lo), float(hi)


@dataclass(frozen=True)
class SimConfig:
    scheme: str
    M: int
    K: int
    n0: int | None = None
    crc: bool = True
    list_size: int = 1
    double_list: bool = False
    snr_db: tuple = (0.0,)
    snr_conv: str = "es"
    max_frames: int = 1_000_000
    min_errors: int = 100
    seed: int = 0
    profile: str = "exhaustive"
    design_snr_db: float | None = None
    connection_mode: str = "dynamic"
    chunk: int = 256
    noiseless: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.min_errors < 1 or self.max_frames < self.min_errors:
            raise ValueError("need 1 <= min_errors <= max_frames")
        if self.list_size < 1 or self.chunk < 1:
            raise ValueError("list size and chunk must be positive")
        if self.profile not in ("exhaustive", "greedy"):
            raise ValueError(f"unknown profile method {self.profile!r}")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in np.atleast_1d(self.snr_db)))

    @property
    def effective_list(self) -> int:
        if self.double_list and self.scheme in ("repeat", "deep"):
            return 2 * self.list_size
        return self.list_size

    @property
    def rate(self) -> float:
        return self.K / self.M


@dataclass
class SimRecord:
    scheme: str
    N0: int
    layers: str
    M: int
    K: int
    crc: int
    list: int
    snr_db: float
    snr_conv: str
    frames: int
    errors: int
    bler: float
    ci_lo: float
    ci_hi: float
    seed: int
    crc_failures: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


class _Scheme:
    """Encoder/decoder pair for one configuration at one design point."""

    def __init__(self, cfg: SimConfig, sigma2: float):
        self.cfg = cfg
        self.poly = CRC11 if cfg.crc else None
        r = self.poly.degree if self.poly else 0
        self.k_total = cfg.K + r
        self.L = cfg.effective_list
        self.layers = ""
        if cfg.scheme == "deep":
            from .profile import build_deep_spec, exhaustive_rate_profile, greedy_rate_profile

            n0 = cfg.n0 or mother_length(cfg.M, "deep")
            layer_n = decompose_extension(cfg.M, n0)
            search = exhaustive_rate_profile if cfg.profile == "exhaustive" else greedy_rate_profile
            ks = search(n0, layer_n, self.k_total, sigma2).k_list
            self.deep = build_deep_spec(n0, ks, layer_n, crc=self.poly)
            self.N0 = n0
            self.layers = "+".join(str(n) for n in layer_n)
        else:
            kind = cfg.scheme
            if kind in ("puncture", "shorten") and cfg.n0 is not None:
                N = cfg.n0
            else:
                N = mother_length(cfg.M, kind, cfg.n0)
            self.rm = RateMatchScheme(kind, N, cfg.M)
            self.spec = shortened_frozen_adjust(build_code_spec(N, self.k_total), self.rm)
            self.N0 = N

    def encode(self, payload: np.ndarray) -> np.ndarray:
        m = crc_attach(payload, self.poly) if self.poly else payload
        if self.cfg.scheme == "deep":
            return deep_encode(self.deep, m)
        return rate_match(polar_encode(self.spec, m), self.rm)

    def decode(self, llr: np.ndarray):
        """Returns (payload estimates, CRC-failure flags)."""
        K = self.cfg.K
        if self.cfg.scheme == "deep":
            res = deep_decode_batch(self.deep, llr, self.L, mode=self.cfg.connection_mode)
            return res.messages[:, :K], res.crc_failed
        u, _ = scl_decode_batch(self.spec, derate_llr(llr, self.rm), self.L)
        msgs = u[..., self.spec.info_set]
        B = msgs.shape[0]
        if self.poly:
            idx, failed = select_by_crc(msgs, self.poly)
        else:
            idx, failed = np.zeros(B, dtype=np.int64), np.zeros(B, dtype=bool)
        return msgs[np.arange(B), idx, :K], failed


def point_sigma2(cfg: SimConfig, snr_db: float) -> float:
    return snr_to_sigma2(snr_db, cfg.snr_conv, cfg.rate)


@lru_cache(maxsize=16)
def _scheme_for(cfg: SimConfig, snr_idx: int) -> _Scheme:
    design = cfg.snr_db[snr_idx] if cfg.design_snr_db is None else cfg.design_snr_db
    return _Scheme(cfg, point_sigma2(cfg, design))


def _run_chunk(cfg: SimConfig, snr_idx: int, start: int, count: int):
    scheme = _scheme_for(cfg, snr_idx)
    sigma2 = point_sigma2(cfg, cfg.snr_db[snr_idx])
    payload = np.empty((count, cfg.K), dtype=np.uint8)
    llr = np.empty((count, cfg.M))
    rngs = [np.random.default_rng([cfg.seed, snr_idx, start + f]) for f in range(count)]
    for f, rng in enumerate(rngs):
        payload[f] = rng.integers(0, 2, cfg.K, dtype=np.uint8)
    cw = scheme.encode(payload)
    for f, rng in enumerate(rngs):
        llr[f] = awgn_transmit(cw[f], sigma2, rng, noiseless=cfg.noiseless)
    est, failed = scheme.decode(llr)
    errors = int(np.any(est != payload, axis=1).sum())
    return errors, int(failed.sum())


def _chunks(cfg: SimConfig):
    start = 0
    while start < cfg.max_frames:
        count = min(cfg.chunk, cfg.max_frames - start)
        yield start, count
        start += count


def _simulate_point(cfg: SimConfig, snr_idx: int, pool: ProcessPoolExecutor | None,
                    workers: int):
    frames = errors = crc_fail = 0
    it = _chunks(cfg)
    if pool is None:
        for start, count in it:
            e, cf = _run_chunk(cfg, snr_idx, start, count)
            frames, errors, crc_fail = frames + count, errors + e, crc_fail + cf
            if errors >= cfg.min_errors:
                break
        return frames, errors, crc_fail
    pending = []
    done = False
    while not done:
        while len(pending) < 2 * workers:
            nxt = next(it, None)
            if nxt is None:
                break
            pending.append((nxt[1], pool.submit(_run_chunk, cfg, snr_idx, *nxt)))
        if not pending:
            break
        count, fut = pending.pop(0)
        e, cf = fut.result()
        frames, errors, crc_fail = frames + count, errors + e, crc_fail + cf
        done = errors >= cfg.min_errors
    for _, fut in pending:
        fut.cancel()
    return frames, errors, crc_fail


def run_bler(cfg: SimConfig, workers: int = 1) -> list[SimRecord]:
    """Simulate every SNR point of ``cfg``; identical output for any ``workers``."""
    records = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for idx, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            try:
                scheme = _scheme_for(cfg, idx)
            except ValueError as exc:
                raise ValueError(f"cannot build {cfg.scheme} code at {snr} dB: {exc}") from exc
            frames, errors, crc_fail = _simulate_point(cfg, idx, pool, workers)
            lo, hi = wilson_interval(errors, frames)
            records.append(SimRecord(
                scheme=cfg.scheme, N0=scheme.N0, layers=scheme.layers, M=cfg.M, K=cfg.K,
                crc=int(cfg.crc), list=cfg.effective_list, snr_db=snr, snr_conv=cfg.snr_conv,
                frames=frames, errors=errors, bler=errors / frames, ci_lo=lo, ci_hi=hi,
                seed=cfg.seed, crc_failures=crc_fail, wall_time=time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return records


def _fmt(v):
    if isinstance(v, float):
        return repr(round(float(v), 12))
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_fmt(v) for v in r.row().values()])
    return buf.getvalue()


def records_to_json(records) -> str:
    return json.dumps([r.row() for r in records], indent=1) + "\n"


_INT_FIELDS = {"N0", "M", "K", "crc", "list", "frames", "errors", "seed"}
_FLOAT_FIELDS = {"snr_db", "bler", "ci_lo", "ci_hi"}


def records_from_csv(text: str) -> list[SimRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        kw = {}
        for f in CSV_FIELDS:
            v = row[f]
            kw[f] = int(v) if f in _INT_FIELDS else float(v) if f in _FLOAT_FIELDS else v
        out.append(SimRecord(**kw))
    return out


def required_snr(records, target_bler: float) -> float:
    """SNR at ``target_bler`` by interpolation linear in dB and log10(BLER).

    Uses the first bracketing pair scanning up in SNR; never extrapolates.
    Zero-BLER points are skipped since they have no logarithm.
    """
    pts = sorted(((r.snr_db, r.bler) for r in records if r.bler > 0), key=lambda p: p[0])
    blers = [b for _, b in pts]
    if any(b2 > b1 for b1, b2 in zip(blers, blers[1:])):
        warnings.warn("BLER records are not monotone in SNR; using the first bracketing pair",
                      stacklevel=2)
    for (s1, b1), (s2, b2) in zip(pts, pts[1:]):
        if b1 == target_bler:
            return s1
        if b1 > target_bler >= b2:
            if b2 == target_bler:
                return s2
            t = (np.log10(target_bler) - np.log10(b1)) / (np.log10(b2) - np.log10(b1))
            return float(s1 + t * (s2 - s1))
    if pts and pts[-1][1] == target_bler:
        return pts[-1][0]
    raise NoBracketError(f"records do not bracket BLER {target_bler:g}")


__all__ = [
    "CSV_FIELDS", "NoBracketError", "SimConfig", "SimRecord", "awgn_transmit", "eb_to_es",
    "es_to_eb", "records_from_csv", "records_to_csv", "records_to_json", "required_snr",
    "run_bler", "snr_to_sigma2", "wilson_interval",
]
