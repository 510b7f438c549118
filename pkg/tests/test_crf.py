import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp, softmax

from clockink.crf import (ChainInstance, CrfConfig, CrfModel, build_chain, chain_order,
                          concat_neighbours, forward_backward, map_decode, nll_and_gradient,
                          predict, sequence_score, slice_base_features, train_crf)
from clockink.errors import ModelMismatchError
from clockink.model import Stroke, bearing_point
from clockink.stslice import STSlice

from oracles import brute_force_chain, central_difference


def _random_model(rng, L, D, scale=1.0):
    return CrfModel(rng.normal(0, scale, (L, D)), rng.normal(0, scale, (L, L)))


def _chain(rng, n, D, L=None):
    y = None if L is None else rng.integers(0, L, n)
    return ChainInstance(rng.normal(size=(n, D)), np.arange(n), y)


@given(st.integers(1, 3), st.integers(1, 5), st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_marginals_match_brute_force(L, n, seed):
    rng = np.random.default_rng(seed)
    m = _random_model(rng, L, 3)
    c = _chain(rng, n, 3)
    marg, logZ = forward_backward(m, c)
    bm, bZ, _ = brute_force_chain(m.W, m.T, c.X)
    assert np.allclose(marg, bm, atol=1e-9)
    assert logZ == pytest.approx(bZ, abs=1e-9)
    assert np.allclose(marg.sum(axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_viterbi_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = _random_model(rng, 3, 4)
    c = _chain(rng, 4, 4)
    _, logZ, best = brute_force_chain(m.W, m.T, c.X)
    y = map_decode(m, c)
    assert np.array_equal(y, best)
    assert logZ >= sequence_score(m, c, y) - 1e-12


def test_two_label_three_node_example():
    rng = np.random.default_rng(7)
    m = _random_model(rng, 2, 2, scale=0.1)
    c = _chain(rng, 3, 2)
    marg, logZ = forward_backward(m, c)
    bm, bZ, _ = brute_force_chain(m.W, m.T, c.X)
    assert np.abs(marg - bm).max() < 1e-9 and abs(logZ - bZ) < 1e-9


def test_single_node_without_transitions_is_softmax():
    rng = np.random.default_rng(1)
    m = CrfModel(rng.normal(size=(5, 3)), np.zeros((5, 5)))
    c = _chain(rng, 1, 3)
    marg, _ = forward_backward(m, c)
    assert np.allclose(marg[0], softmax(m.W @ c.X[0]), atol=1e-12)


def test_no_transitions_gives_per_node_argmax():
    rng = np.random.default_rng(2)
    m = CrfModel(rng.normal(size=(4, 3)), np.zeros((4, 4)))
    c = _chain(rng, 6, 3)
    assert np.array_equal(map_decode(m, c), np.argmax(c.X @ m.W.T, axis=1))


def test_zero_model_is_uniform():
    m = CrfModel.zeros(12, 5)
    c = _chain(np.random.default_rng(0), 7, 5)
    marg, logZ = forward_backward(m, c)
    assert np.allclose(marg, 1 / 12)
    assert logZ == pytest.approx(7 * np.log(12))
    assert np.array_equal(map_decode(m, c), np.zeros(7, dtype=int))


def test_dominant_transition_forces_constant_labels():
    rng = np.random.default_rng(3)
    m = CrfModel(rng.normal(0, 0.1, (4, 3)), 50.0 * np.eye(4))
    y = map_decode(m, _chain(rng, 8, 3))
    assert len(set(y.tolist())) == 1


def test_dimension_mismatch():
    m = CrfModel.zeros(3, 4)
    with pytest.raises(ModelMismatchError):
        forward_backward(m, _chain(np.random.default_rng(0), 3, 5))
    with pytest.raises(ModelMismatchError):
        map_decode(m, _chain(np.random.default_rng(0), 3, 5))
    with pytest.raises(ModelMismatchError):
        CrfModel(np.zeros((3, 4)), np.zeros((2, 2)))


def test_zero_model_loss_is_log_L():
    for L in (2, 5, 12):
        c = ChainInstance(np.ones((1, 3)), np.arange(1), np.array([0]))
        loss, _ = nll_and_gradient(CrfModel.zeros(L, 3), [c])
        assert loss == pytest.approx(np.log(L))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    L, D = 3, 4
    m = _random_model(rng, L, D, scale=0.3)
    chains = [_chain(rng, n, D, L) for n in (1, 3, 4, 4)]
    _, (dW, dT) = nll_and_gradient(m, chains)
    analytic = np.concatenate([dW.ravel(), dT.ravel()])

    def f(theta):
        return nll_and_gradient(m.with_params(theta), chains)[0]

    numeric = central_difference(f, m.params(), h=1e-5)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-3)
    assert rel.max() < 1e-5


def test_loss_matches_enumerated_likelihood():
    rng = np.random.default_rng(11)
    m = _random_model(rng, 3, 2)
    chains = [_chain(rng, n, 2, 3) for n in (2, 3)]
    nll = 0.0
    for c in chains:
        _, logZ, _ = brute_force_chain(m.W, m.T, c.X)
        nll += logZ - sequence_score(m, c, c.labels)
    loss, _ = nll_and_gradient(m, chains, lam=0.0)
    assert loss == pytest.approx(nll / 5, abs=1e-10)


def test_lambda_changes_loss_by_penalty():
    rng = np.random.default_rng(4)
    m = _random_model(rng, 3, 4)
    chains = [_chain(rng, 4, 4, 3)]
    a, _ = nll_and_gradient(m, chains, lam=0.0)
    b, _ = nll_and_gradient(m, chains, lam=0.01)
    assert b - a == pytest.approx(0.005 * np.sum(m.params() ** 2), rel=1e-12)


def test_label_out_of_range():
    c = ChainInstance(np.ones((2, 3)), np.arange(2), np.array([0, 3]))
    with pytest.raises(ValueError):
        nll_and_gradient(CrfModel.zeros(3, 3), [c])


def _separable_chains(rng, n_chains=20, L=3, D=4):
    proto = rng.normal(0, 3, (L, D))
    out = []
    for _ in range(n_chains):
        y = rng.integers(0, L, 5)
        out.append(ChainInstance(proto[y] + rng.normal(0, 0.3, (5, D)), np.arange(5), y))
    return out


def test_training_fits_separable_data():
    chains = _separable_chains(np.random.default_rng(0))
    m = train_crf(chains, CrfConfig(epochs=200), n_labels=3)
    for c in chains:
        assert np.array_equal(map_decode(m, c), c.labels)
    assert all(b <= a for a, b in zip(m.loss_curve, m.loss_curve[1:]))


def test_zero_epochs_returns_zero_model():
    chains = _separable_chains(np.random.default_rng(0))
    m = train_crf(chains, CrfConfig(epochs=0), n_labels=3)
    assert not m.W.any() and not m.T.any()


def test_duplicated_dataset_gives_same_model():
    chains = _separable_chains(np.random.default_rng(0))
    cfg = CrfConfig(epochs=50)
    a = train_crf(chains, cfg, n_labels=3)
    b = train_crf(chains + chains, cfg, n_labels=3)
    assert np.allclose(a.W, b.W, atol=1e-10) and np.allclose(a.T, b.T, atol=1e-10)


def test_training_is_deterministic():
    chains = _separable_chains(np.random.default_rng(5))
    a = train_crf(chains, CrfConfig(epochs=30), n_labels=3)
    b = train_crf(chains, CrfConfig(epochs=30), n_labels=3)
    assert np.array_equal(a.W, b.W)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    m = _random_model(rng, 4, 6)
    m.features = CrfConfig(concat=False).feature_dict()
    p = tmp_path / "crf.json"
    m.save(p)
    m2 = CrfModel.load(p)
    assert np.array_equal(m.W, m2.W) and np.array_equal(m.T, m2.T)
    assert m2.config().concat is False


# -- chain construction --------------------------------------------------------

def _slice_at(deg, layer, sid=None, r=80.0):
    sid = layer if sid is None else sid
    x, y = bearing_point((0, 0), r, deg)
    s = Stroke(sid, [[x - 3, y - 3, 1000.0 * layer], [x + 3, y + 3, 1000.0 * layer + 50]])
    return STSlice.from_strokes([s], (0, 0), layer)


def test_chain_starts_at_north():
    degs = [30 * k for k in range(12)]
    order = np.random.default_rng(0).permutation(12)
    slices = [_slice_at(degs[k], i) for i, k in enumerate(order)]
    ch = chain_order(slices)
    assert [round(slices[i].angular_mid) % 360 for i in ch] == degs


def test_north_tie_goes_to_earlier_layer():
    # 10 and 350 degrees are equally far from north
    a, b = _slice_at(10, 0), _slice_at(350, 1)
    assert list(chain_order([a, b])) == [0, 1]
    a, b = _slice_at(10, 1), _slice_at(350, 0)
    assert list(chain_order([a, b])) == [1, 0]


def test_single_slice_chain_repeats_itself():
    s = _slice_at(90, 0)
    c = build_chain([s])
    b = slice_base_features([s], CrfConfig())[0]
    assert len(c) == 1
    assert np.array_equal(c.X[0], np.concatenate([b, b, b]))
    assert c.X.shape[1] == 3 * CrfConfig().base_dim()


def test_concat_neighbours_wrap_and_pad():
    B = np.arange(6.0).reshape(3, 2)
    w = concat_neighbours(B, wrap=True)
    assert np.array_equal(w[0], [4, 5, 0, 1, 2, 3])
    p = concat_neighbours(B, wrap=False)
    assert np.array_equal(p[0], [0, 0, 0, 1, 2, 3])
    assert np.array_equal(p[2], [2, 3, 4, 5, 0, 0])


def test_base_feature_layout():
    s = _slice_at(90, 0)
    assert slice_base_features([s], CrfConfig(ctx=False, downsample=True)).shape == (1, 5 * 144 + 1)
    v = slice_base_features([s], CrfConfig())[0]
    assert v[-1] == 1.0
    assert v[-3] == pytest.approx(s.angular_mid / 360.0)
    assert v[-2] == pytest.approx(0.1)
    v = slice_base_features([s], CrfConfig(image_norm=2.0))[0]
    assert np.linalg.norm(v[:-3]) == pytest.approx(2.0)


def test_chain_order_irrelevant_without_transitions():
    rng = np.random.default_rng(8)
    slices = [_slice_at(d, i) for i, d in enumerate(rng.uniform(0, 360, 6))]
    cfg = CrfConfig(concat=False)
    m = CrfModel(rng.normal(size=(12, cfg.node_dim())), np.zeros((12, 12)), features=cfg.feature_dict())
    _, post = predict(m, slices)
    B = slice_base_features(slices, cfg)
    assert np.allclose(post, softmax(B @ m.W.T, axis=1), atol=1e-12)
    # shuffling the input permutes the posteriors accordingly
    perm = rng.permutation(6)
    _, post2 = predict(m, [slices[i] for i in perm])
    assert np.allclose(post2, post[perm], atol=1e-12)


def test_predict_posteriors_on_simplex(models, small_corpus):
    from clockink.pipeline import gold_slices
    from clockink.preprocess import estimate_geometry
    _, d, gt = small_corpus[0]
    sl, lab = gold_slices(d, gt, estimate_geometry(d))
    labels, post = predict(models.crf, sl)
    assert np.allclose(post.sum(axis=1), 1.0, atol=1e-9)
    assert post.min() >= 0
    assert set(labels.tolist()) <= set(range(1, 13))
