import itertools

import mpmath as mp
import numpy as np
import pytest

from deeppolar.decode import (
    LLR_MAX,
    ConfigurationError,
    DeepLayerView,
    f_llr,
    g_llr,
    modified_scl_decode,
    modified_scl_decode_batch,
    pm_update,
    sc_decode,
    scl_decode,
    scl_decode_batch,
    soscl_decode,
    soscl_decode_batch,
)
from deeppolar.gf2 import CRC11, crc_attach, crc_verify, polar_transform, polar_transform_transposed
from deeppolar.polar import CodeSpec, build_code_spec, polar_encode


def noisy_llr(c, sigma, rng):
    y = 1.0 - 2.0 * c + sigma * rng.standard_normal(c.shape)
    return 2.0 * y / sigma**2


def all_codewords(spec):
    msgs = np.array(list(itertools.product([0, 1], repeat=spec.K)), dtype=np.uint8)
    return msgs, polar_encode(spec, msgs)


def bit_posterior_llr(cws, llr):
    # exact per-bit posterior under a uniform prior over the codebook
    logp = llr @ (1.0 - 2.0 * cws.T) / 2.0
    out = np.empty(llr.shape)
    for i in range(cws.shape[1]):
        zero, one = cws[:, i] == 0, cws[:, i] == 1
        out[:, i] = np.logaddexp.reduce(logp[:, zero], axis=1) - np.logaddexp.reduce(logp[:, one], axis=1)
    return out


def test_f_llr_examples():
    assert f_llr(0.0, 5.0) == 0.0
    exact = float(mp.log((1 + mp.e ** 5) / (mp.e ** 2 + mp.e ** 3)))
    assert f_llr(2.0, 3.0) == pytest.approx(exact, abs=1e-12)
    assert f_llr(2.0, 3.0) == pytest.approx(1.693454, abs=1e-6)
    rng = np.random.default_rng(0)
    x, y = rng.normal(0, 8, (2, 1000))
    fx = f_llr(x, y)
    assert np.allclose(fx, f_llr(y, x))
    assert np.all(np.abs(fx) <= np.minimum(np.abs(x), np.abs(y)) + 1e-12)
    assert np.all(np.sign(fx) == np.sign(x) * np.sign(y))
    ms = f_llr(x, y, minsum=True)
    assert np.allclose(ms, np.sign(x) * np.sign(y) * np.minimum(np.abs(x), np.abs(y)))
    assert np.all(np.abs(ms) >= np.abs(fx) - 1e-12)


def test_f_llr_large_inputs_stable():
    assert f_llr(1e3, -7.0) == pytest.approx(-7.0, abs=1e-9)
    assert np.isfinite(f_llr(700.0, 700.0))


def test_g_llr_examples():
    assert g_llr(3.0, -1.0, 0) == 2.0
    assert g_llr(3.0, -1.0, 1) == -4.0
    assert g_llr(30.0, 30.0, 0) == LLR_MAX


def test_pm_update_examples():
    assert pm_update(0.0, 0.0, 0) == pytest.approx(np.log(2))
    assert pm_update(0.0, 2.0, 0) == pytest.approx(0.12693, abs=1e-5)
    assert pm_update(0.0, 2.0, 1) == pytest.approx(2.12693, abs=1e-5)


def test_sc_hand_trace():
    spec = CodeSpec(2, 1, [1])
    assert sc_decode(spec, [1.0, -3.0]).tolist() == [0, 1]


def test_sc_noiseless_and_all_frozen():
    rng = np.random.default_rng(1)
    spec = build_code_spec(64, 30)
    m = rng.integers(0, 2, (20, 30))
    c = polar_encode(spec, m)
    u = sc_decode(spec, LLR_MAX * (1.0 - 2.0 * c))
    assert np.array_equal(u[:, spec.info_set], m)
    zero = CodeSpec(16, 0, [])
    assert not sc_decode(zero, rng.normal(0, 3, 16)).any()


def test_sc_length_mismatch():
    with pytest.raises(ValueError):
        sc_decode(build_code_spec(8, 4), np.zeros(7))


def test_scl_one_equals_sc():
    rng = np.random.default_rng(2)
    spec = build_code_spec(64, 32)
    c = polar_encode(spec, rng.integers(0, 2, (300, 32)))
    llr = noisy_llr(c, 0.9, rng)
    u_sc = sc_decode(spec, llr)
    u_l, _ = scl_decode_batch(spec, llr, 1)
    assert np.array_equal(u_sc, u_l[:, 0])


def test_scl_output_sorted_and_metrics():
    rng = np.random.default_rng(3)
    spec = build_code_spec(32, 16)
    c = polar_encode(spec, rng.integers(0, 2, 16))
    res = scl_decode(spec, noisy_llr(c, 0.8, rng), 8)
    assert len(res) == 8
    assert np.all(np.diff(res.metrics) >= 0)
    assert all(pm >= 0 for _, pm in res)


def test_scl_full_list_is_ml():
    rng = np.random.default_rng(4)
    spec = build_code_spec(16, 6)
    _, cws = all_codewords(spec)
    c = cws[rng.integers(0, len(cws), 100)]
    llr = noisy_llr(c, 0.8, rng)
    u, pm = scl_decode_batch(spec, llr, 64)
    score = llr @ (1.0 - 2.0 * cws.T)
    ml = cws[np.argmax(score, axis=1)]
    best = polar_transform(u[:, 0])
    for f in range(100):
        if not np.array_equal(best[f], ml[f]):
            # only exact metric ties may differ
            assert score[f].max() == pytest.approx(
                float(llr[f] @ (1.0 - 2.0 * best[f])), abs=1e-9)
    # with the whole codebook kept the metric is the exact negative log posterior
    exact = np.logaddexp(0, -(1.0 - 2.0 * best) * llr).sum(axis=1)
    assert np.allclose(pm[:, 0], exact, atol=1e-8)


def test_scl_all_frozen_single_path():
    spec = CodeSpec(8, 0, [])
    res = scl_decode(spec, np.random.default_rng(5).normal(0, 2, 8), 4)
    assert len(res) == 1 and not res.best.any()


def test_scl_crc_selection():
    rng = np.random.default_rng(6)
    spec = build_code_spec(64, 40)
    hits = 0
    for _ in range(30):
        m = crc_attach(rng.integers(0, 2, 29))
        llr = noisy_llr(polar_encode(spec, m), 0.75, rng)
        res = scl_decode(spec, llr, 8, crc=CRC11)
        if not res.crc_failed:
            assert crc_verify(res.best[spec.info_set])
            hits += np.array_equal(res.best[spec.info_set], m)
    assert hits >= 25


def test_soscl_degenerate_codes():
    rng = np.random.default_rng(7)
    llr = rng.normal(1.0, 2.0, 8)
    u, lam = soscl_decode(CodeSpec(8, 0, []), llr, 4)
    assert not u.any() and np.all(lam == LLR_MAX)
    _, lam = soscl_decode(CodeSpec(8, 8, np.arange(8)), llr, 1)
    assert np.allclose(lam, llr)


def test_soscl_matches_exact_posterior():
    rng = np.random.default_rng(8)
    spec = build_code_spec(8, 4)
    _, cws = all_codewords(spec)
    c = cws[rng.integers(0, len(cws), 400)]
    llr = noisy_llr(c, 0.8, rng)
    _, _, lam = soscl_decode_batch(spec, llr, 16)
    post = np.clip(bit_posterior_llr(cws, llr), -LLR_MAX, LLR_MAX)
    assert np.mean(np.sign(lam) == np.sign(post)) >= 0.99
    assert np.corrcoef(lam.ravel(), post.ravel())[0, 1] > 0.99


def toy_view():
    # N_0 = 8: one layer of length 4 carrying two bits, connection set {2,3,4,5}
    return DeepLayerView(8, np.array([6, 7]), (np.array([2, 3, 4, 5]),), (np.array([0, 1]),))


def test_modified_zero_soft_free_mode_equals_plain_scl():
    rng = np.random.default_rng(9)
    view = toy_view()
    plain = CodeSpec(8, 6, [2, 3, 4, 5, 6, 7])
    llr = noisy_llr(np.zeros((50, 8)), 0.9, rng)
    u1, pm1 = modified_scl_decode_batch(view, llr, np.zeros_like(llr), 4, mode="free")
    u2, pm2 = scl_decode_batch(plain, llr, 4)
    assert np.array_equal(u1, u2) and np.allclose(pm1, pm2)


def test_modified_combined_llr_enters_metric():
    view = DeepLayerView(2, np.array([], dtype=np.int64), (np.array([1]),), (np.array([0]),))
    # leaf 0 is frozen and sees f(0, 1) = 0; leaf 1 sees 0 + 1 = 1 plus 2.5 of soft input
    res = modified_scl_decode(view, [0.0, 1.0], [0.0, 2.5], 1)
    assert res.metrics[0] == pytest.approx(np.log(2) + np.log1p(np.exp(-3.5)))
    assert res.best.tolist() == [0, 0]


def test_modified_dynamic_round_trip():
    rng = np.random.default_rng(10)
    view = toy_view()
    for _ in range(20):
        m0 = rng.integers(0, 2, 2)
        u1 = np.zeros(4, dtype=np.uint8)
        u1[[0, 1]] = rng.integers(0, 2, 2)
        c1 = polar_transform_transposed(u1)
        u0 = np.zeros(8, dtype=np.uint8)
        u0[[6, 7]] = m0
        u0[[2, 3, 4, 5]] = c1
        llr = LLR_MAX * (1.0 - 2.0 * polar_transform(u0).astype(float))
        res = modified_scl_decode(view, llr, np.zeros(8), 2)
        assert np.array_equal(res.best, u0)
        for path, _ in res:
            # every surviving path keeps the layer's frozen inputs at zero
            assert not polar_transform_transposed(path[[2, 3, 4, 5]])[[2, 3]].any()


def test_modified_rejects_bad_soft_vector():
    view = toy_view()
    with pytest.raises(ConfigurationError):
        modified_scl_decode(view, np.zeros(8), np.eye(8)[0], 2)
    with pytest.raises(ConfigurationError):
        modified_scl_decode(view, np.zeros(8), np.zeros(7), 2)
    with pytest.raises(ConfigurationError):
        view.leaf_plan("other")
    with pytest.raises(ConfigurationError):
        DeepLayerView(8, np.array([2, 7]), (np.array([2, 3]),), (np.array([0]),))
