"""Density evolution under the Gaussian approximation.

LLR means are propagated through the SC tree assuming ``L ~ N(mu, 2 mu)``.
Internally the check-node transfer works with ``log(1 - psi(mu))`` so that
very reliable channels (where ``psi`` rounds to 1 in double precision) are
still handled exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .gf2 import log2_exact

ETA_MAX = 1e6
_GH_NODES = 101
_LAG_NODES = 80
_MU_SWITCH = 2.0
_INV_ITERS = 80


@lru_cache(maxsize=1)
def _nodes():
    z, wz = np.polynomial.hermite.hermgauss(_GH_NODES)
    t, wt = np.polynomial.laguerre.laggauss(_LAG_NODES)
    return z, wz / np.sqrt(np.pi), 2.0 * t, 2.0 * wt


def log_one_minus_psi(mu) -> np.ndarray:
    """``log(1 - psi(mu))`` for ``mu >= 0``; ``-inf`` at or above ETA_MAX.

    Small means use Gauss-Hermite quadrature of ``E[2 sigmoid(-X)]``.  Large
    means use the identity ``1 - psi(mu) = 4 e^{-mu/4} / sqrt(4 pi mu) *
    int_0^inf exp(-x/2 - x^2/(4 mu)) sigmoid(x) dx`` with Gauss-Laguerre
    nodes, which keeps full relative accuracy deep in the tail.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mean must be non-negative")
    z, wz, x, wx = _nodes()
    out = np.empty(mu.shape)
    flat_mu = mu.ravel()
    flat = out.ravel()
    small = flat_mu < _MU_SWITCH
    if small.any():
        m = flat_mu[small][:, None]
        vals = 2.0 * expit(-(m + 2.0 * np.sqrt(m) * z)) @ wz
        flat[small] = np.log(vals)
    big = ~small
    if big.any():
        m = flat_mu[big]
        integral = np.exp(-x[None, :] ** 2 / (4.0 * m[:, None])) * expit(x)[None, :] @ wx
        flat[big] = np.log(4.0) - m / 4.0 - 0.5 * np.log(4.0 * np.pi * m) + np.log(integral)
    flat[flat_mu >= ETA_MAX] = -np.inf
    return flat.reshape(mu.shape)


def psi(mu):
    """``E[tanh(X/2)]`` for ``X ~ N(mu, 2 mu)``."""
    return -np.expm1(log_one_minus_psi(mu))


def _inv_log_phi(target, hi):
    # Vectorised bisection for mu in [0, hi] with log(1 - psi(mu)) = target.
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.array(np.broadcast_to(hi, target.shape), dtype=float)
    for _ in range(_INV_ITERS):
        mid = 0.5 * (lo + hi)
        above = log_one_minus_psi(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-12 * np.maximum(1.0, hi)):
            break
    return 0.5 * (lo + hi)


def log_one_minus_psi_inv(target):
    """Mean ``mu`` with ``log(1 - psi(mu)) = target`` (target <= 0).

    Use this instead of :func:`psi_inv` for means above ~150, where ``psi``
    itself rounds to 1 in double precision.
    """
    target = np.asarray(target, dtype=float)
    if np.any(target > 0):
        raise ValueError("log(1 - psi) must be non-positive")
    res = _inv_log_phi(np.maximum(target, -np.finfo(float).max), ETA_MAX)
    return np.where(target == 0, 0.0, np.where(target == -np.inf, ETA_MAX, res))


def psi_inv(v):
    """Inverse of :func:`psi` on ``[0, 1)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v >= 1) or np.any(v < 0):
        raise ValueError("psi_inv is defined on [0, 1)")
    res = _inv_log_phi(np.log1p(-v), ETA_MAX)
    return np.where(v == 0, 0.0, res)


def check_mean(a, b):
    """``psi_inv(psi(a) * psi(b))`` computed in the log-complement domain.

    Inputs at or above ETA_MAX act as perfectly known (psi = 1).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    la = log_one_minus_psi(a)
    lb = log_one_minus_psi(b)
    # 1 - (1-pa)(1-pb) = pa + pb - pa*pb, with pa = e^la, pb = e^lb
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.logaddexp(la, lb)
        target = s + np.log1p(-np.exp(la + lb - s))
    hi = np.minimum(a, b)
    out = _inv_log_phi(target, np.minimum(hi, ETA_MAX))
    out = np.where(la == -np.inf, np.minimum(b, ETA_MAX), out)
    out = np.where(lb == -np.inf, np.minimum(a, ETA_MAX), out)
    out = np.where((a == 0) | (b == 0), 0.0, out)
    return out


def _forward_levels(n: int, mu0) -> list[np.ndarray]:
    """Input means of every tree depth; level d has node-major layout."""
    N = 1 << n
    level = np.broadcast_to(np.asarray(mu0, dtype=float), (N,)).copy()
    levels = [level]
    for d in range(n):
        half = N >> (d + 1)
        v = level.reshape(-1, 2, half)
        a, b = v[:, 0, :], v[:, 1, :]
        nxt = np.empty_like(v)
        nxt[:, 0, :] = check_mean(a, b)
        nxt[:, 1, :] = a + b
        level = nxt.reshape(N)
        levels.append(level)
    return levels


def dega_forward(n: int, mu0) -> np.ndarray:
    """Leaf means for a length-2^n code; ``mu0`` is the channel LLR mean
    (``2 / sigma^2``), scalar or per-position."""
    if np.any(np.asarray(mu0) < 0):
        raise ValueError("channel mean must be non-negative")
    return _forward_levels(n, mu0)[-1]


def dega_backward(n: int, levels: list[np.ndarray], frozen_set) -> np.ndarray:
    """Backward (extrinsic) means at the codeword positions.

    ``levels`` is the forward profile from :func:`forward_profile`.  Frozen
    leaves start at ETA_MAX, information leaves at 0.
    """
    N = 1 << n
    if len(levels) != n + 1 or levels[0].size != N:
        raise ValueError("forward profile does not match the tree depth")
    eta = np.zeros(N)
    eta[np.asarray(frozen_set, dtype=np.int64)] = ETA_MAX
    for d in range(n - 1, -1, -1):
        half = N >> (d + 1)
        mu = levels[d].reshape(-1, 2, half)
        e = eta.reshape(-1, 2, half)
        el, er = e[:, 0, :], e[:, 1, :]
        out = np.empty_like(e)
        out[:, 0, :] = check_mean(el, np.minimum(er + mu[:, 1, :], ETA_MAX))
        out[:, 1, :] = np.minimum(er + check_mean(el, mu[:, 0, :]), ETA_MAX)
        eta = out.reshape(N)
    return eta


def forward_profile(n: int, mu0) -> list[np.ndarray]:
    return _forward_levels(n, mu0)


def q_func(x):
    return ndtr(-np.asarray(x, dtype=float))


def bit_error_probs(mu) -> np.ndarray:
    """Per-bit ``Q(sqrt(mu / 2))``."""
    return q_func(np.sqrt(np.asarray(mu, dtype=float) / 2.0))


def sc_error_prob(info_set, mu) -> float:
    """``1 - prod_{i in I} (1 - Q(sqrt(mu_i / 2)))``."""
    idx = np.asarray(info_set, dtype=np.int64)
    if idx.size == 0:
        return 0.0
    x = np.sqrt(np.asarray(mu, dtype=float)[idx] / 2.0)
    # log(1 - Q(x)) = log_ndtr(x), accurate for tiny Q
    return float(-np.expm1(log_ndtr(x).sum()))


@dataclass(frozen=True, eq=False)
class DegaProfile:
    mu: np.ndarray
    eta: np.ndarray | None
    design_sigma2: float

    def to_csv(self) -> str:
        lines = ["index,mu,eta"]
        eta = self.eta if self.eta is not None else np.full(self.mu.size, np.nan)
        for i, (m, e) in enumerate(zip(self.mu, eta)):
            lines.append(f"{i},{m:.12g},{e:.12g}")
        return "\n".join(lines) + "\n"


def dega_profile(n: int, sigma2: float, frozen_set=None) -> DegaProfile:
    levels = forward_profile(n, 2.0 / sigma2)
    eta = dega_backward(n, levels, frozen_set) if frozen_set is not None else None
    return DegaProfile(levels[-1], eta, sigma2)


@dataclass(frozen=True)
class ExtendedErrorProb:
    pe0: float
    pe_ub: float
    layer_pe: tuple


@lru_cache(maxsize=256)
def _cached_levels(n: int, sigma2: float):
    return tuple(_forward_levels(n, 2.0 / sigma2))


def layer_decoder_info(nq: int, info_set) -> np.ndarray:
    """Information set of the standard polar code that decodes a layer's
    reversed segment (the transposed transform reverses bit order)."""
    return np.sort(nq - 1 - np.asarray(info_set, dtype=np.int64))


@lru_cache(maxsize=4096)
def _layer_terms(nq: int, info: tuple, sigma2: float):
    # backward means on the reversed orientation plus the layer's own SC estimate
    n = log2_exact(nq)
    levels = list(_cached_levels(n, sigma2))
    dec_info = layer_decoder_info(nq, info)
    frozen = np.setdiff1d(np.arange(nq), dec_info)
    eta = dega_backward(n, levels, frozen)
    eta.setflags(write=False)
    return eta, sc_error_prob(dec_info, levels[-1])


def extended_error_prob(spec, sigma2: float) -> ExtendedErrorProb:
    """SC error estimates for a layered code.

    ``pe0`` credits every layer-q information connection with the layer's
    backward mean; ``pe_ub`` additionally charges each layer's own SC failure.
    """
    n0 = log2_exact(spec.n0)
    mu0 = _cached_levels(n0, float(sigma2))[-1]
    log_ok = log_ndtr(np.sqrt(mu0[np.asarray(spec.i0, dtype=np.int64)] / 2.0)).sum()
    layer_pe = []
    for layer, a in zip(spec.layers, spec.a_sets):
        nq = layer.n
        info = np.asarray(layer.info_set, dtype=np.int64)
        eta, pe_q = _layer_terms(nq, tuple(info.tolist()), float(sigma2))
        a = np.asarray(a, dtype=np.int64)
        eff = mu0[a[info]] + eta[nq - 1 - info]
        log_ok += log_ndtr(np.sqrt(eff / 2.0)).sum()
        layer_pe.append(pe_q)
    pe0 = float(-np.expm1(log_ok))
    log_ok_all = np.log1p(-pe0) + sum(np.log1p(-p) for p in layer_pe)
    pe_ub = float(-np.expm1(log_ok_all))
    return ExtendedErrorProb(pe0, pe_ub, (pe0, *layer_pe))


def bec_evolution(eps: float, n: int) -> np.ndarray:
    """Exact BEC bit-channel erasure probabilities, leaves in SC order."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("erasure probability must lie in [0, 1]")
    z = np.array([float(eps)])
    for _ in range(n):
        z = np.stack([2 * z - z * z, z * z], axis=-1).reshape(-1)
    return z


def bec_example_bound(rounded: bool = True) -> float:
    """SC block-error bound for the (N0, N1, K) = (8, 4, 3) BEC(0.5) example.

    Layer 1 carries information on its two best bit channels; decoding fails
    unless the better one is correct and the weaker one is either correct or
    erased and guessed right.  With ``rounded`` the channel erasures are taken
    at two decimals (0.44, 0.06) as in the worked example.
    """
    eps = np.sort(bec_evolution(0.5, 2))
    weak, strong = eps[1], eps[0]
    if rounded:
        weak, strong = round(weak, 2), round(strong, 2)
    return float(1 - (1 - weak) * (1 - strong) - 0.5 * weak * (1 - strong))
