import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegtrust import nn
from eegtrust.errors import ConfigError, DataError, NotFittedError, NumericalError
from eegtrust.models import (
    KNN,
    MODEL_IDS,
    CNNConfig,
    GaussianNB,
    LinearSVM,
    TrainHyper,
    ViTConfig,
    cnn_forward,
    init_cnn,
    init_params,
    make_model,
    patchify,
    unpatchify,
)
from eegtrust.models.vit import embed, encode, forward_tokens, train_tokens
from eegtrust.nn import Tensor, grad_check


def test_patchify_shape_and_order(rng):
    img = rng.normal(size=(9, 9, 4))
    patches = patchify(img, 3)
    assert patches.shape == (9, 36)
    np.testing.assert_array_equal(patches[0], img[0:3, 0:3].reshape(-1))
    np.testing.assert_array_equal(patches[5], img[3:6, 6:9].reshape(-1))
    np.testing.assert_array_equal(unpatchify(patches, 3, 4), img)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([1, 3, 9]), st.integers(1, 3))
def test_patchify_inverse_property(p, batch):
    img = np.random.default_rng(p * 10 + batch).normal(size=(batch, 9, 9, 4))
    np.testing.assert_array_equal(unpatchify(patchify(img, p), p, 4), img)


def test_patch_size_must_divide_grid():
    with pytest.raises(ConfigError):
        patchify(np.zeros((9, 9, 4)), 2)
    with pytest.raises(ConfigError):
        ViTConfig(patch_size=2)
    with pytest.raises(ConfigError):
        ViTConfig(model_dim=30, n_heads=4)


def test_token_sequence_has_class_row(rng):
    cfg = ViTConfig(model_dim=16, mlp_dim=32, n_blocks=2)
    params = init_params(cfg)
    z0 = embed(params, patchify(rng.normal(size=(2, 9, 9, 4)), 3))
    assert z0.shape == (2, 10, 16)
    expected = params["cls_token"].data + params["pos_embed"].data[0]
    np.testing.assert_allclose(z0.data[:, 0], np.broadcast_to(expected, (2, 16)))


def test_zeroed_branches_make_encoder_identity(rng):
    cfg = ViTConfig()
    params = init_params(cfg)
    for i in range(cfg.n_blocks):
        for key in ("attn.W_o", "mlp.W2", "mlp.b2"):
            params[f"blocks.{i}.{key}"].data[...] = 0.0
    tokens = patchify(rng.normal(size=(3, 9, 9, 4)), 3)
    np.testing.assert_allclose(encode(params, tokens, cfg).data, embed(params, tokens).data, atol=1e-9)


def test_init_conventions():
    cfg = ViTConfig(seed=3)
    params = init_params(cfg)
    w = params["blocks.0.attn.W_q"].data
    assert np.abs(w).max() <= 0.04 and 0.01 < w.std() < 0.02
    assert np.all(params["blocks.0.ln1.gain"].data == 1) and np.all(params["head.b"].data == 0)
    assert params["pos_embed"].shape == (10, 64)


def test_tiny_vit_loss_gradient(rng):
    # D=8, two heads, one block, two patches (a 2x1 patch grid via the flat tokeniser)
    cfg = ViTConfig(model_dim=8, n_heads=2, n_blocks=1, mlp_dim=16, spatial=False,
                    n_channels=4, feature_dim=2, nosp_tokens=2, init_std=0.5)
    params = init_params(cfg)
    tokens = rng.normal(size=(3, 2, 4))
    labels = np.array([0, 1, 1])
    f = lambda: nn.cross_entropy(forward_tokens(params, tokens, cfg), labels)
    assert grad_check(f, list(params.values())) < 1e-4


def test_class_token_readout_ignores_patch_order_without_positions(rng):
    cfg = ViTConfig(model_dim=16, mlp_dim=32, n_blocks=2, init_std=0.3)
    params = init_params(cfg)
    params["pos_embed"].data[...] = 0.0
    tokens = patchify(rng.normal(size=(1, 9, 9, 4)), 3)
    perm = rng.permutation(9)
    a = forward_tokens(params, tokens, cfg).data
    b = forward_tokens(params, tokens[:, perm], cfg).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_non_finite_activation_is_reported(rng):
    cfg = ViTConfig(model_dim=8, n_heads=2, n_blocks=1, mlp_dim=8)
    params = init_params(cfg)
    params["blocks.0.mlp.b2"].data[0] = np.inf
    with pytest.raises(NumericalError, match="block 0"):
        forward_tokens(params, patchify(rng.normal(size=(1, 9, 9, 4)), 3), cfg)


def test_training_rejects_single_class(rng):
    cfg = ViTConfig(model_dim=8, n_heads=2, n_blocks=1, mlp_dim=8)
    params = init_params(cfg)
    with pytest.raises(DataError):
        train_tokens(lambda p, t: forward_tokens(p, t, cfg), params, rng.normal(size=(4, 9, 36)),
                     np.zeros(4), TrainHyper(max_epochs=1))


def test_training_early_stop_and_loss_drop(rng):
    cfg = ViTConfig(model_dim=16, n_heads=2, n_blocks=1, mlp_dim=16)
    params = init_params(cfg)
    y = np.repeat([0, 1], 16)
    tokens = rng.normal(size=(32, 9, 36)) * 0.1 + (2 * y - 1)[:, None, None]
    log = train_tokens(lambda p, t: forward_tokens(p, t, cfg), params, tokens, y,
                       TrainHyper(lr=1e-2, max_epochs=300, batch_size=32, early_stop_loss=1e-3))
    assert log.stopped_early and log.epoch_loss[-1] < 1e-3 < log.initial_loss


def test_cnn_gradient(rng):
    cfg = CNNConfig(grid=4, in_channels=2, conv1=2, conv2=3)
    params = init_cnn(cfg)
    x = rng.normal(size=(2, 4, 4, 2))
    f = lambda: nn.cross_entropy(cnn_forward(params, x, cfg), np.array([0, 1]))
    assert grad_check(f, list(params.values())) < 1e-4


def test_gaussian_nb_matches_hand_computation():
    X = np.array([[0.0], [2.0], [10.0], [12.0]])[:, :, None]
    y = np.array([0, 0, 1, 1])
    nb = GaussianNB().fit(X, y)
    # standardised feature: mean 6, std sqrt(26); class means -/+ 5/sqrt(26), class var 1/26
    z = (np.array([5.0]) - 6.0) / np.sqrt(26.0)
    m0, m1, v = -5 / np.sqrt(26), 5 / np.sqrt(26), 1 / 26
    expected = (-(z - m1) ** 2 + (z - m0) ** 2) / (2 * v)
    np.testing.assert_allclose(nb.decision_function(np.array([[[5.0]]])), expected, rtol=1e-10)
    assert nb.predict(np.array([[[5.0]], [[7.0]]])).tolist() == [0, 1]


def test_knn_votes_and_ties():
    X = np.array([0.0, 1.0, 2.0, 10.0, 11.0, 12.0])[:, None, None]
    y = np.array([0, 0, 0, 1, 1, 1])
    knn = KNN(k=3).fit(X, y)
    assert knn.predict(np.array([0.5, 11.5])[:, None, None]).tolist() == [0, 1]
    np.testing.assert_allclose(knn.decision_function(np.array([[[1.0]]])), [0.0])
    even = KNN(k=2).fit(np.array([0.0, 2.0])[:, None, None], np.array([1, 0]))
    # one vote each: the split goes to label 0
    assert even.predict(np.array([[[1.0]]])).tolist() == [0]


def test_linear_svm_separates_and_keeps_best(rng):
    X = np.concatenate([rng.normal(-2, 0.5, size=(40, 3, 2)), rng.normal(2, 0.5, size=(40, 3, 2))])
    y = np.repeat([0, 1], 40)
    svm = LinearSVM(lam=1e-4).fit(X, y)
    assert np.mean(svm.predict(X) == y) == 1.0
    Xs = svm.scaler.transform(X.reshape(80, -1))
    assert svm.objective_ == pytest.approx(svm.objective(Xs, 2.0 * y - 1, svm.w_, svm.b_))
    assert svm.objective_ < svm.objective(Xs, 2.0 * y - 1, np.zeros(6), 0.0)


def test_standardizer_uses_training_statistics(rng):
    X = rng.normal(5.0, 3.0, size=(50, 2, 2))
    nb = GaussianNB().fit(X, np.repeat([0, 1], 25))
    np.testing.assert_allclose(nb.scaler.mean_, X.reshape(50, -1).mean(axis=0))


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        KNN().predict(np.zeros((1, 2, 2)))


def test_fit_input_checks(rng):
    with pytest.raises(DataError):
        GaussianNB().fit(rng.normal(size=(4, 8)), np.array([0, 1, 0, 1]))
    with pytest.raises(DataError):
        GaussianNB().fit(rng.normal(size=(4, 2, 2)), np.zeros(4))


@pytest.mark.parametrize("model_id", MODEL_IDS)
def test_every_model_learns_an_easy_problem(rng, model_id):
    n = 120
    y = np.repeat([0, 1], n // 2)
    X = rng.normal(size=(n, 64, 4))
    X[:, :, 1] += 1.5 * (2 * y - 1)[:, None]
    hyper = TrainHyper(lr=1e-3, max_epochs=15, batch_size=32, dtype="float32")
    model = make_model(model_id, ViTConfig(model_dim=16, n_heads=2, n_blocks=2, mlp_dim=32), hyper)
    model.fit(X[::2], y[::2])
    assert np.mean(model.predict(X[1::2]) == y[1::2]) >= 0.9


def test_unknown_model():
    with pytest.raises(ConfigError):
        make_model("rf")
